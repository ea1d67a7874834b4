#!/usr/bin/env python3
"""Writes the MRT fixtures under crates/core/data/traces.

The encoder here is written from the RFC 6396 / RFC 4271 layouts and
shares no code with the Rust crate. Output is deterministic.

    sample.mrt      mixed TABLE_DUMP_V2 / BGP4MP / BGP4MP_ET, v4 and v6
    sample.mrt.gz   the same, gzipped
    clean.mrt       routes fully covered by clean_roas.csv and clean_whitelist.toml
    hijack.mrt      three announcements, one from a wrong origin (hijack_roas.csv)
"""

import gzip
import ipaddress
import random
import struct
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "crates" / "core" / "data" / "traces"

TABLE_DUMP_V2, BGP4MP, BGP4MP_ET = 13, 16, 17
PEER_INDEX_TABLE, RIB_IPV4_UNICAST, RIB_IPV6_UNICAST = 1, 2, 4
STATE_CHANGE, MESSAGE, MESSAGE_AS4 = 0, 1, 4
AS_SET, AS_SEQUENCE = 1, 2


def mrt(ts, typ, sub, body, micro=None):
    if micro is not None:
        body = struct.pack(">I", micro) + body
    return struct.pack(">IHHI", ts, typ, sub, len(body)) + body


def prefix_bytes(net):
    n = (net.prefixlen + 7) // 8
    return bytes([net.prefixlen]) + net.network_address.packed[:n]


def attr(flags, code, value):
    if len(value) > 255:
        return struct.pack(">BBH", flags | 0x10, code, len(value)) + value
    return struct.pack(">BBB", flags, code, len(value)) + value


def as_path(segments, four):
    out = b""
    fmt = ">I" if four else ">H"
    for kind, asns in segments:
        out += struct.pack(">BB", kind, len(asns))
        for a in asns:
            out += struct.pack(fmt, a)
    return attr(0x40, 2, out)


def origin():
    return attr(0x40, 1, b"\x00")


def next_hop(ip):
    return attr(0x40, 3, ipaddress.ip_address(ip).packed)


def extras(rng):
    out = b""
    if rng.random() < 0.5:
        out += attr(0x80, 4, struct.pack(">I", rng.randrange(1000)))
    if rng.random() < 0.5:
        comms = b"".join(struct.pack(">HH", 65000, rng.randrange(100)) for _ in range(rng.randrange(1, 4)))
        out += attr(0xC0, 8, comms)
    return out


def mp_reach(nh, nets):
    body = struct.pack(">HBB", 2, 1, 16) + ipaddress.ip_address(nh).packed + b"\x00"
    body += b"".join(prefix_bytes(n) for n in nets)
    return attr(0x80, 14, body)


def mp_unreach(nets):
    body = struct.pack(">HB", 2, 1) + b"".join(prefix_bytes(n) for n in nets)
    return attr(0x80, 15, body)


def bgp_message(typ, body):
    return b"\xff" * 16 + struct.pack(">HB", 19 + len(body), typ) + body


def update(withdrawn=(), attrs=b"", nlri=()):
    w = b"".join(prefix_bytes(n) for n in withdrawn)
    n = b"".join(prefix_bytes(x) for x in nlri)
    return bgp_message(2, struct.pack(">H", len(w)) + w + struct.pack(">H", len(attrs)) + attrs + n)


def keepalive():
    return bgp_message(4, b"")


def bgp4mp_header(peer_as, local_as, peer_ip, local_ip, four):
    p, l = ipaddress.ip_address(peer_ip), ipaddress.ip_address(local_ip)
    afi = 1 if p.version == 4 else 2
    fmt = ">IIHH" if four else ">HHHH"
    return struct.pack(fmt, peer_as, local_as, 0, afi) + p.packed + l.packed


def peer_index(collector, view, peers):
    body = ipaddress.ip_address(collector).packed + struct.pack(">H", len(view)) + view.encode()
    body += struct.pack(">H", len(peers))
    for bgp_id, ip, asn in peers:
        addr = ipaddress.ip_address(ip)
        four = asn > 0xFFFF
        kind = (1 if addr.version == 6 else 0) | (2 if four else 0)
        body += bytes([kind]) + ipaddress.ip_address(bgp_id).packed + addr.packed
        body += struct.pack(">I" if four else ">H", asn)
    return body


def rib(seq, net, entries):
    body = struct.pack(">I", seq) + prefix_bytes(net) + struct.pack(">H", len(entries))
    for idx, originated, attrs in entries:
        body += struct.pack(">HIH", idx, originated, len(attrs)) + attrs
    return body


def rib_v6_attrs(nh, segments):
    # RIB entries carry only the next hop in MP_REACH_NLRI.
    reach = attr(0x80, 14, bytes([16]) + ipaddress.ip_address(nh).packed)
    return origin() + as_path(segments, True) + reach


def random_v4(rng):
    base = rng.choice([ipaddress.ip_network("10.0.0.0/8"), ipaddress.ip_network("172.16.0.0/12"),
                       ipaddress.ip_network("100.64.0.0/10")])
    plen = rng.randrange(max(base.prefixlen + 4, 16), 25)
    bits = rng.getrandbits(plen - base.prefixlen) << (32 - plen)
    return ipaddress.ip_network((int(base.network_address) | bits, plen))


def random_v6(rng):
    base = ipaddress.ip_network("2001:db8::/32")
    plen = rng.choice([40, 44, 48])
    bits = rng.getrandbits(plen - 32) << (128 - plen)
    return ipaddress.ip_network((int(base.network_address) | bits, plen))


def random_path(rng, origin_as, peer_as):
    middle = [rng.randrange(64512, 65535) for _ in range(rng.randrange(0, 3))]
    segs = [(AS_SEQUENCE, [peer_as] + middle + [origin_as])]
    if rng.random() < 0.05:
        segs.append((AS_SET, sorted({rng.randrange(64512, 65535) for _ in range(2)})))
    return segs


def sample():
    rng = random.Random(20240601)
    ts = 1_717_200_000
    peers = [
        ("192.0.2.1", "192.0.2.1", 65001),
        ("192.0.2.2", "192.0.2.2", 65002),
        ("192.0.2.3", "2001:db8::3", 4_200_000_003),
        ("192.0.2.4", "192.0.2.4", 4_200_000_004),
    ]
    out = [mrt(ts, TABLE_DUMP_V2, PEER_INDEX_TABLE, peer_index("192.0.2.254", "sample", peers))]
    seq = 0
    v4 = sorted({random_v4(rng) for _ in range(400)}, key=lambda n: (int(n.network_address), n.prefixlen))
    for net in v4:
        entries = []
        for idx in sorted(rng.sample(range(4), rng.randrange(1, 4))):
            peer_as = peers[idx][2]
            path = random_path(rng, rng.randrange(64512, 65535), peer_as)
            attrs = origin() + as_path(path, True) + next_hop("192.0.2.%d" % (idx + 1)) + extras(rng)
            entries.append((idx, ts - rng.randrange(86400), attrs))
        out.append(mrt(ts, TABLE_DUMP_V2, RIB_IPV4_UNICAST, rib(seq, net, entries)))
        seq += 1
    v6 = sorted({random_v6(rng) for _ in range(120)}, key=lambda n: (int(n.network_address), n.prefixlen))
    for net in v6:
        path = random_path(rng, rng.randrange(64512, 65535), peers[2][2])
        entries = [(2, ts - rng.randrange(86400), rib_v6_attrs("2001:db8::3", path))]
        out.append(mrt(ts, TABLE_DUMP_V2, RIB_IPV6_UNICAST, rib(seq, net, entries)))
        seq += 1

    local_v4, local_v6 = "192.0.2.254", "2001:db8::fe"
    for i in range(1500):
        ts += rng.randrange(0, 3)
        roll = rng.random()
        et = rng.random() < 0.3
        typ = BGP4MP_ET if et else BGP4MP
        micro = rng.randrange(1_000_000) if et else None
        if roll < 0.05:
            peer_as = rng.choice([65001, 65002])
            body = bgp4mp_header(peer_as, 65000, "192.0.2.%d" % (peer_as - 65000), local_v4, False)
            body += struct.pack(">HH", rng.randrange(1, 7), rng.randrange(1, 7))
            out.append(mrt(ts, typ, STATE_CHANGE, body, micro))
            continue
        if roll < 0.12:
            four = rng.random() < 0.5
            body = bgp4mp_header(65001, 65000, "192.0.2.1", local_v4, four) + keepalive()
            out.append(mrt(ts, typ, MESSAGE_AS4 if four else MESSAGE, body, micro))
            continue
        if roll < 0.14:
            body = bgp4mp_header(65002, 65000, "192.0.2.2", local_v4, False) + update()
            out.append(mrt(ts, typ, MESSAGE, body, micro))
            continue
        if roll < 0.32:
            # IPv6 over a v6 session, 4-byte ASNs.
            peer_as = 4_200_000_003
            announce = [random_v6(rng) for _ in range(rng.randrange(0, 3))]
            withdraw = [random_v6(rng) for _ in range(rng.randrange(0, 2))]
            if not announce and not withdraw:
                announce = [random_v6(rng)]
            attrs = b""
            if announce:
                attrs += origin() + as_path(random_path(rng, rng.randrange(64512, 65535), peer_as), True)
                attrs += mp_reach("2001:db8::3", announce)
            if withdraw:
                attrs += mp_unreach(withdraw)
            body = bgp4mp_header(peer_as, 65000, "2001:db8::3", local_v6, True) + update(attrs=attrs)
            out.append(mrt(ts, typ, MESSAGE_AS4, body, micro))
            continue
        four = rng.random() < 0.6
        peer_as = rng.choice([65001, 65002]) if not four else rng.choice([65001, 4_200_000_004])
        peer_ip = {65001: "192.0.2.1", 65002: "192.0.2.2", 4_200_000_004: "192.0.2.4"}[peer_as]
        announce = [random_v4(rng) for _ in range(rng.randrange(0, 4))]
        withdraw = [random_v4(rng) for _ in range(rng.randrange(0, 3) if rng.random() < 0.4 else 0)]
        if not announce and not withdraw:
            withdraw = [random_v4(rng)]
        attrs = b""
        if announce:
            origin_as = rng.randrange(64512, 65535)
            attrs = origin() + as_path(random_path(rng, origin_as, peer_as), four) + next_hop(peer_ip) + extras(rng)
        body = bgp4mp_header(peer_as, 65000, peer_ip, local_v4, four) + update(withdraw, attrs, announce)
        out.append(mrt(ts, typ, MESSAGE_AS4 if four else MESSAGE, body, micro))
    return b"".join(out)


def clean():
    """A RIB snapshot followed by re-announcements of the same routes.

    Every (prefix, origin) pair has a ROA, every member a whitelist entry
    for what it sends, and no prefix ever changes origin.
    """
    rng = random.Random(77)
    ts = 1_717_300_000
    members = [(65101, "192.0.2.11"), (65102, "192.0.2.12"), (65103, "192.0.2.13")]
    peers = [(ip, ip, asn) for asn, ip in members]
    routes = {}
    while len(routes) < 150:
        net = random_v4(rng)
        routes[net] = (rng.randrange(64600, 64700), rng.randrange(3))
    v6_routes = {}
    while len(v6_routes) < 30:
        v6_routes[random_v6(rng)] = (rng.randrange(64600, 64700), 1)
    paths = {}
    for net, (orig, idx) in list(routes.items()) + list(v6_routes.items()):
        paths[net] = [members[idx][0]] + ([65200] if rng.random() < 0.5 else []) + [orig]

    out = [mrt(ts, TABLE_DUMP_V2, PEER_INDEX_TABLE, peer_index("192.0.2.254", "clean", peers))]
    seq = 0
    for net in sorted(routes, key=lambda n: int(n.network_address)):
        _, idx = routes[net]
        attrs = origin() + as_path([(AS_SEQUENCE, paths[net])], True) + next_hop(members[idx][1])
        out.append(mrt(ts, TABLE_DUMP_V2, RIB_IPV4_UNICAST, rib(seq, net, [(idx, ts - 3600, attrs)])))
        seq += 1
    for net in sorted(v6_routes, key=lambda n: int(n.network_address)):
        attrs = rib_v6_attrs("2001:db8::12", [(AS_SEQUENCE, paths[net])])
        out.append(mrt(ts, TABLE_DUMP_V2, RIB_IPV6_UNICAST, rib(seq, net, [(1, ts - 3600, attrs)])))
        seq += 1

    nets = sorted(routes, key=lambda n: int(n.network_address))
    for i in range(400):
        ts += 1
        net = rng.choice(nets)
        _, idx = routes[net]
        asn, ip = members[idx]
        four = rng.random() < 0.5
        attrs = origin() + as_path([(AS_SEQUENCE, paths[net])], four) + next_hop(ip)
        body = bgp4mp_header(asn, 65000, ip, "192.0.2.254", four) + update(attrs=attrs, nlri=[net])
        out.append(mrt(ts, BGP4MP, MESSAGE_AS4 if four else MESSAGE, body))

    roas = ["ASN,IP Prefix,Max Length,Trust Anchor"]
    for net, (orig, _) in sorted(list(routes.items()) + list(v6_routes.items()), key=lambda kv: (kv[0].version, int(kv[0].network_address))):
        roas.append("AS%d,%s,%d,ta-lab" % (orig, net, net.prefixlen))
    wl = ['ixp = "ix-lab"', "version = 1", ""]
    for idx, (asn, _) in enumerate(members):
        mine = [n for n, (_, i) in list(routes.items()) + list(v6_routes.items()) if i == idx]
        mine.sort(key=lambda n: (n.version, int(n.network_address)))
        wl.append("[[members]]")
        wl.append("asn = %d" % asn)
        wl.append("prefixes = [%s]" % ", ".join('"%s"' % n for n in mine))
        wl.append("")
    return b"".join(out), "\n".join(roas) + "\n", "\n".join(wl)


def hijack():
    ts = 1_717_400_000
    peer = ("192.0.2.21", 65301)
    routes = [
        ("203.0.113.0/24", [65301, 65310]),
        ("198.51.100.0/24", [65301, 64666]),
        ("192.0.2.128/25", [65301, 65320]),
    ]
    out = []
    for i, (net, path) in enumerate(routes):
        attrs = origin() + as_path([(AS_SEQUENCE, path)], True) + next_hop(peer[0])
        body = bgp4mp_header(peer[1], 65000, peer[0], "192.0.2.254", True)
        body += update(attrs=attrs, nlri=[ipaddress.ip_network(net)])
        out.append(mrt(ts + i, BGP4MP, MESSAGE_AS4, body))
    roas = "\n".join([
        "ASN,IP Prefix,Max Length,Trust Anchor",
        "AS65310,203.0.113.0/24,24,ta-lab",
        "AS65330,198.51.100.0/24,24,ta-lab",
        "AS65320,192.0.2.0/24,25,ta-lab",
    ]) + "\n"
    return b"".join(out), roas


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    data = sample()
    (OUT / "sample.mrt").write_bytes(data)
    with open(OUT / "sample.mrt.gz", "wb") as f:
        with gzip.GzipFile(fileobj=f, mode="wb", mtime=0, filename="") as gz:
            gz.write(data)
    mrt_bytes, roas, wl = clean()
    (OUT / "clean.mrt").write_bytes(mrt_bytes)
    (OUT / "clean_roas.csv").write_text(roas)
    (OUT / "clean_whitelist.toml").write_text(wl)
    mrt_bytes, roas = hijack()
    (OUT / "hijack.mrt").write_bytes(mrt_bytes)
    (OUT / "hijack_roas.csv").write_text(roas)


if __name__ == "__main__":
    main()
