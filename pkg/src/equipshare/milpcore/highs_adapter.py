"""Command-line bridge: solve an LP file with HiGHS and write the adapter solution format.

    python -m equipshare.milpcore.highs_adapter model.lp model.sol [time_limit]
"""

from __future__ import annotations

import sys


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) not in (2, 3):
        print("usage: highs_adapter MODEL.lp OUT.sol [TIME_LIMIT]", file=sys.stderr)
        return 64
    import highspy

    lp_path, sol_path = argv[0], argv[1]
    scale = 1.0
    with open(lp_path) as fh:
        for line in fh:
            if line.startswith("\\ objective scale:"):
                scale = float(line.split(":", 1)[1])
                break
            if not line.startswith("\\"):
                break
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 1e-9)
    # tightening mip_feasibility_tolerance as well made HiGHS 1.15 report
    # wrong optima on some compiled models; its default is kept
    if len(argv) == 3:
        h.setOptionValue("time_limit", float(argv[2]))
    if h.readModel(lp_path) != highspy.HighsStatus.kOk:
        print(f"HiGHS could not read {lp_path}", file=sys.stderr)
        return 1
    h.run()
    status = h.getModelStatus()
    S = highspy.HighsModelStatus
    with open(sol_path, "w") as out:
        if status in (S.kOptimal, S.kModelEmpty):
            out.write("status optimal\n")
        elif status == S.kInfeasible:
            out.write("status infeasible\n")
            return 0
        elif status in (S.kUnbounded, S.kUnboundedOrInfeasible):
            out.write("status unbounded\n")
            return 0
        elif status == S.kTimeLimit:
            out.write("status time-limit\n")
        else:
            print(f"unexpected HiGHS status {h.modelStatusToString(status)}", file=sys.stderr)
            return 1
        info = h.getInfo()
        out.write(f"objective {info.objective_function_value / scale!r}\n")
        lp = h.getLp()
        values = h.getSolution().col_value
        for name, v in zip(lp.col_names_, values):
            out.write(f"{name} {float(v)!r}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
