#!/usr/bin/env python3
"""Open exported captures with dpkt and decode the Modbus TCP traffic.

usage: check_pcap.py DATASET_DIR [DATASET_DIR ...]

Each directory needs capture.pcap and summary.json. Exits 1 on any problem.
"""
import json
import struct
import sys
from pathlib import Path

import dpkt


def check(directory: Path) -> list[str]:
    errors = []
    summary = json.loads((directory / "summary.json").read_text())
    expected = summary["network"]["delivered"] + summary["network"]["flooded"]

    frames = modbus = arp = 0
    with open(directory / "capture.pcap", "rb") as fh:
        reader = dpkt.pcap.Reader(fh)
        if reader.datalink() != dpkt.pcap.DLT_EN10MB:
            return [f"{directory}: link type {reader.datalink()}"]
        for _ts, buf in reader:
            frames += 1
            eth = dpkt.ethernet.Ethernet(buf)
            if isinstance(eth.data, dpkt.arp.ARP):
                arp += 1
                continue
            ip = eth.data
            if not isinstance(ip, dpkt.ip.IP) or not isinstance(ip.data, dpkt.tcp.TCP):
                errors.append(f"{directory}: frame {frames} is neither ARP nor IPv4/TCP")
                continue
            tcp = ip.data
            if 502 not in (tcp.sport, tcp.dport):
                continue
            payload = bytes(tcp.data)
            if len(payload) < 8:
                errors.append(f"{directory}: frame {frames}: short Modbus payload")
                continue
            _tid, proto, length, _unit, fc = struct.unpack(">HHHBB", payload[:8])
            if proto != 0 or length != len(payload) - 6:
                errors.append(f"{directory}: frame {frames}: bad MBAP header")
            elif fc & 0x7F not in (0x03, 0x06, 0x10):
                errors.append(f"{directory}: frame {frames}: unexpected function 0x{fc:02x}")
            else:
                modbus += 1

    if frames != expected:
        errors.append(f"{directory}: {frames} frames in pcap, network delivered+flooded {expected}")
    if modbus == 0:
        errors.append(f"{directory}: no Modbus TCP frames")
    print(f"{directory}: {frames} frames, {modbus} Modbus TCP, {arp} ARP")
    return errors


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__, file=sys.stderr)
        return 2
    errors = []
    for arg in sys.argv[1:]:
        errors += check(Path(arg))
    for e in errors[:20]:
        print("error:", e, file=sys.stderr)
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
