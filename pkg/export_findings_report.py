import json
import sys
from pathlib import Path

from core.ledger import FindingsLedger


def summarize_findings(path: Path, stats_dir: Path = None):
    ledger = FindingsLedger(str(path))
    exps = ledger.data.get("experiments", {})

    total = sum(int(v.get("total", 0)) for v in exps.values())
    passed = sum(int(v.get("passed", 0)) for v in exps.values())
    rate = (passed / total * 100.0) if total else 0.0

    print(f"FILE: {path.resolve()}")
    print(f"EXPERIMENTS: {len(exps)}  runs={total} passed={passed} rate={rate:.2f}%")

    print("\nWeakest experiments:")
    for name, r, t in ledger.weakest(top_k=10):
        print(f"  {name:<32} : pass={r * 100.0:>6.1f}%  runs={t}")

    flagged = ledger.flagged()
    if flagged:
        print(f"\nFlagged runs ({len(flagged)}), most recent last:")
        for item in flagged[-10:]:
            vals = ", ".join(f"{k}={v}" for k, v in sorted(item.get("values", {}).items()) if not isinstance(v, (dict, list)))
            print(f"  {item.get('experiment')}: {vals}")

    stats_dir = stats_dir or path.parent
    for stats in sorted(stats_dir.glob("stats_*.json")):
        obj = json.loads(stats.read_text(encoding="utf-8"))
        statuses = obj.get("statuses", {})
        print(f"\nSOLVER [{obj.get('run', stats.stem)}]: " + " ".join(f"{k}={v}" for k, v in sorted(statuses.items())))
        for prob, b in sorted(obj.get("problems", {}).items()):
            print(f"  {prob:<32} solves={b.get('solves', 0):<5} worst_residual={float(b.get('worst_residual', 0.0)):.2e}")


if __name__ == "__main__":
    if len(sys.argv) < 2:
        print("Usage: python export_findings_report.py <path_to_findings_json>")
        sys.exit(1)
    summarize_findings(Path(sys.argv[1]))
