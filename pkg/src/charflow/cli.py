"""Command-line front end: ``charflow survey|analyze|verify|table``.

Exit status: 0 when every requested check passes or its hypothesis is not
met, 1 when an asserted check fails, 2 for usage and configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

from . import io
from .errors import (CharflowError, ConfigError, IncompleteDossierError, PreconditionError,
                     StaleDatabaseError, StarShapednessError)
from .maslov import DEFAULT_M_MAX
from .orbitfinder import orbit_from_record, survey
from .pipeline import build_dossier, parse_checks, run_checks
from .surface import metrics, surface_from_config, surface_hash

log = logging.getLogger("charflow")

TABLE_FIELDS = ("prime_id", "action", "period", "i1", "nu1", "mean_index", "chi_hat", "case",
                "classification")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _load_surface(path):
    cfg = io.read_json(path)
    try:
        surface = surface_from_config(cfg)
    except PreconditionError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return surface, surface_hash(cfg)


def _window(text: str | None):
    if text is None:
        return None
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"--window expects T_MIN,T_MAX, got {text!r}") from None
    return lo, hi


def _positive(kind):
    def parse(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return parse


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def cmd_survey(args) -> int:
    surface, h = _load_surface(args.config)
    res = survey(surface, seeds=args.seeds, window=_window(args.window), seed=args.seed)
    if res.family:
        for fam in res.families:
            log.warning("orbit family at action %.12g (%d members); one representative kept",
                        fam["action"], fam["count"])
    doc = io.database_doc(h, [o.to_record() for o in res.orbits], res.coverage(), res.families)
    io.write_json(args.out, doc)
    print(f"{len(res.orbits)} prime orbits -> {args.out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    surface, h = _load_surface(args.config)
    db = io.load_database(args.db, h)
    if not db["orbits"]:
        log.warning("orbit database %s is empty", args.db)
    sm = metrics(surface)
    dossiers = [build_dossier(surface, orbit_from_record(surface, rec), sm, args.m_max)
                for rec in db["orbits"]]
    doc = io.dossier_doc(h, io.file_hash(args.db), dossiers, db.get("survey"), args.m_max)
    io.write_json(args.out, doc)
    print(f"{len(dossiers)} dossiers -> {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    surface, h = _load_surface(args.config)
    doc, dossiers = io.load_dossiers(args.db, h)
    checks = parse_checks(args.checks)
    inputs = {"surface_hash": h, "dossier_hash": io.file_hash(args.db),
              "database_hash": doc.get("database_hash")}
    report = run_checks(dossiers, metrics(surface), surface.dim // 2, checks, args.tol,
                        m_max=doc.get("m_max"), survey_info=doc.get("survey"), inputs=inputs)
    io.write_json(args.out, report.to_dict())
    for name, entry in report.entries.items():
        print(f"{name}: {'PASS' if entry.passed else 'FAIL'} ({entry.status})")
    return EXIT_OK if report.all_passed else EXIT_FAIL


def table_rows(dossiers) -> list[dict]:
    rows = []
    for d in dossiers:
        fd, rec = d.floquet, d.index
        rows.append({
            "prime_id": d.prime_id,
            "action": d.action,
            "period": d.period,
            "i1": None if rec is None else rec.i_maslov_1,
            "nu1": None if rec is None else rec.nu_1,
            "mean_index": None if rec is None else rec.mean_index,
            "chi_hat": None if d.chi_hat is None else str(d.chi_hat),
            "case": None if fd is None or fd.case_tag is None else fd.case_tag.label(),
            "classification": None if fd is None else fd.classification,
        })
    return rows


def cmd_table(args) -> int:
    _, dossiers = io.load_dossiers(args.db)
    rows = table_rows(dossiers)
    if args.format == "json":
        json.dump(rows, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return EXIT_OK
    writer = csv.DictWriter(sys.stdout, fieldnames=TABLE_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: "" if v is None else repr(v) if isinstance(v, float) else v
                         for k, v in row.items()})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="charflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("survey", help="search for closed characteristics")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=_u64, default=0)
    p.add_argument("--seeds", type=_positive(int), default=32, help="number of shooting seeds")
    p.add_argument("--window", help="period window T_MIN,T_MAX")
    p.set_defaults(func=cmd_survey)

    p = sub.add_parser("analyze", help="Floquet data and indices for every orbit in a database")
    p.add_argument("--config", required=True)
    p.add_argument("--db", required=True, help="orbit database")
    p.add_argument("--out", required=True)
    p.add_argument("--m-max", type=_positive(int), default=DEFAULT_M_MAX)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("verify", help="evaluate identities and theorem verdicts")
    p.add_argument("--config", required=True)
    p.add_argument("--db", required=True, help="dossier file")
    p.add_argument("--out", required=True)
    p.add_argument("--checks", default="all", help="comma-separated check names or 'all'")
    p.add_argument("--tol", type=_positive(float), default=1e-6)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("table", help="print one row per orbit")
    p.add_argument("--db", required=True, help="dossier file")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_table)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, StaleDatabaseError, StarShapednessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IncompleteDossierError as exc:
        print(f"error: incomplete dossiers: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CharflowError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
