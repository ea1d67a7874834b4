#!/usr/bin/env python3
"""Rewrites the sha256 fields in crates/core/data/manifest.toml."""

import hashlib
import re
from pathlib import Path

DATA = Path(__file__).resolve().parent.parent / "crates" / "core" / "data"
ENTRY = re.compile(r'\{ path = "([^"]+)", sha256 = "[0-9a-f]*" \}')


def digest(match):
    path = match.group(1)
    h = hashlib.sha256((DATA / path).read_bytes()).hexdigest()
    return '{ path = "%s", sha256 = "%s" }' % (path, h)


def main():
    manifest = DATA / "manifest.toml"
    manifest.write_text(ENTRY.sub(digest, manifest.read_text()))


if __name__ == "__main__":
    main()
