#!/usr/bin/env python3
"""Reference external twin for the line protocol.

Default behaviour echoes the requested action (or the first raw dose) back as
the single observation feature. Failure modes for harness tests:

  --mode garbage   emit a non-JSON line in response to step
  --mode crash     exit abruptly on the first step
  --mode wrong     answer step with an acknowledgment instead of an observation
  --mode error     answer step with an error frame
  --mode slow      sleep --sleep seconds before every step response
"""

import argparse
import json
import sys
import time


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--mode", default="echo",
                    choices=["echo", "garbage", "crash", "wrong", "error", "slow"])
    ap.add_argument("--sleep", type=float, default=5.0)
    args = ap.parse_args()

    x0 = None
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            print(json.dumps({"error": "malformed request"}), flush=True)
            continue
        cmd = msg.get("cmd")
        if cmd == "init":
            x0 = msg.get("x0", [])
            print(json.dumps({"ok": True}), flush=True)
        elif cmd == "reset":
            x0 = None
            print(json.dumps({"ok": True}), flush=True)
        elif cmd == "step":
            if args.mode == "crash":
                return 1
            if args.mode == "garbage":
                print("this is not a frame", flush=True)
                continue
            if args.mode == "wrong":
                print(json.dumps({"ok": True}), flush=True)
                continue
            if args.mode == "error":
                print(json.dumps({"error": "twin cannot simulate this action"}), flush=True)
                continue
            if args.mode == "slow":
                time.sleep(args.sleep)
            if x0 is None:
                print(json.dumps({"error": "step before init"}), flush=True)
                continue
            raw = msg.get("raw")
            value = float(raw[0]) if raw else float(msg.get("a", 0))
            print(json.dumps({"x": [value]}), flush=True)
        else:
            print(json.dumps({"error": "unknown command"}), flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
