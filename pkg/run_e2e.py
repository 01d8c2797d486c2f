"""End-to-end run: solve every bundled config and compare those with an oracle."""

import json
import logging
import tempfile
from pathlib import Path

logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(levelname)s %(message)s")
# Per-iteration optimizer progress for debugging
logging.getLogger("mfg_exit.optimizer").setLevel(logging.DEBUG)

from mfg_exit.commands.common import CommandOptions
from mfg_exit.commands.compare import cmd_compare
from mfg_exit.commands.solve import cmd_solve
from mfg_exit.utils.io import load_run_config

ZOO = [
    "zero_flux_1d",
    "positive_flux_above",
    "positive_flux_threshold",
    "positive_flux_below",
    "exponential_2d",
    "model_2d",
    "tabulated_1d",
]


def main():
    summary = {}
    with tempfile.TemporaryDirectory(prefix="mfg_e2e_") as tmp:
        for name in ZOO:
            config = load_run_config(name)
            out = Path(tmp) / name
            print(f"\n{'='*60}")
            print(f"{name}: n_cells={config.n_cells} oracle={config.oracle}")
            print(f"{'='*60}\n")

            opts = CommandOptions(out=out)
            solved = cmd_solve(config, opts)
            compared = cmd_compare(config, opts) if config.oracle else None
            entry = {"solve": solved.name, "compare": compared.name if compared is not None else None}
            compare_file = out / "compare.json"
            if compare_file.is_file():
                report = json.loads(compare_file.read_text(encoding="utf-8"))
                entry.update({k: report[k] for k in ("m_linf", "du_linf", "objective_gap", "passed")})
            diagnostics = json.loads((out / "diagnostics.json").read_text(encoding="utf-8"))
            entry["diagnostics_passed"] = diagnostics["passed"]
            entry["mass_balance_gap"] = diagnostics["mass_balance_gap"]
            summary[name] = entry

    print(f"\n{'='*60}")
    print("SUMMARY")
    print(f"{'='*60}")
    print(json.dumps(summary, indent=2))


if __name__ == "__main__":
    main()
