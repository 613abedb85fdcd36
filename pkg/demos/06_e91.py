"""Build the E91 key distribution model and check it.

Run: python3 demos/06_e91.py
"""
from qacp.e91 import build_e91, e91_source, verify_e91

m = build_e91(n=1)
print(e91_source(m))

report = verify_e91(m)
print(report.to_text())

# without either party's shadow constant, the measurements can never synchronise
for side in ("alice", "bob"):
    r = verify_e91(build_e91(drop_shadow=side))
    print(f"drop {side}'s shadow: {r.verdict}; send_B reachable: {r.send_reachable}")
