#!/usr/bin/env python3
"""Counts records, announcements and withdrawals in an MRT file with mrtparse.

The numbers are the reference the Rust decoder is checked against; they
are frozen into crates/core/data/manifest.toml.

    python3 tools/reference_counts.py crates/core/data/traces/sample.mrt
"""

import sys

import mrtparse


def value_of(field):
    return next(iter(field)) if isinstance(field, dict) else field


def count(path):
    c = dict(records=0, errors=0, state_changes=0, keepalives=0, announcements=0, withdrawals=0)
    for entry in mrtparse.Reader(path):
        c["records"] += 1
        if entry.err:
            c["errors"] += 1
            continue
        d = entry.data
        typ, sub = value_of(d["type"]), value_of(d["subtype"])
        if typ == 13 and sub in (2, 4):
            c["announcements"] += len(d["rib_entries"])
        elif typ in (16, 17) and sub == 0:
            c["state_changes"] += 1
        elif typ in (16, 17) and sub in (1, 4):
            msg = d["bgp_message"]
            if value_of(msg["type"]) != 2:
                c["keepalives"] += 1
                continue
            c["withdrawals"] += len(msg.get("withdrawn_routes", []))
            c["announcements"] += len(msg.get("nlri", []))
            for a in msg.get("path_attributes", []):
                code = value_of(a["type"])
                if code == 14:
                    c["announcements"] += len(a["value"].get("nlri", []))
                elif code == 15:
                    c["withdrawals"] += len(a["value"].get("withdrawn_routes", []))
    return c


def main():
    for path in sys.argv[1:]:
        c = count(path)
        print("# " + path)
        for k, v in c.items():
            print("%s = %d" % (k, v))


if __name__ == "__main__":
    main()
