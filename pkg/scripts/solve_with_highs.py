"""Solve an exported LP/MPS model with HiGHS and write a 'name value' solution file.

Development helper used to produce tests/fixtures/*.sol; highspy is not a
runtime dependency of the package.

    python scripts/solve_with_highs.py model.lp model.sol
"""

import sys

import highspy


def main(model_path: str, out_path: str) -> None:
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    if h.readModel(model_path) != highspy.HighsStatus.kOk:
        raise SystemExit(f"HiGHS could not read {model_path}")
    h.run()
    status = h.getModelStatus()
    if status != highspy.HighsModelStatus.kOptimal:
        raise SystemExit(f"not optimal: {h.modelStatusToString(status)}")
    lp = h.getLp()
    values = h.getSolution().col_value
    with open(out_path, "w") as fh:
        fh.write(f"# HiGHS {h.version()} on {model_path}\n")
        fh.write(f"# objective {h.getInfo().objective_function_value!r}\n")
        for name, value in zip(lp.col_names_, values):
            fh.write(f"{name} {value!r}\n")


if __name__ == "__main__":
    main(*sys.argv[1:3])
