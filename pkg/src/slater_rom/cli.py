"""Command-line frontend: a thin client over the HTTP service.

Every subcommand builds one request, sends it to the service (in-process
by default, or a remote server via --server), and writes the response to
files in the output directory.  The command itself does no numerics, so
CLI and HTTP results are identical by construction.

Outputs are deterministic for a fixed config: CSV files use '.' decimals
and 17 significant digits, JSON files carry full-precision floats, and
wall-clock timings go to a separate metadata.json.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 artifact schema mismatch.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import httpx

from . import __version__
from .config import ExperimentConfig, load_config, preset
from .errors import ConfigError, DomainError, NumericalError, SchemaError

__all__ = ["main"]

_EXIT_BY_ERROR_TYPE = {"config": 2, "numerical": 3, "schema": 4}


class ServiceFailure(Exception):
    """A request came back with an error envelope (or no response at all)."""

    def __init__(self, exit_code: int, detail: str):
        super().__init__(detail)
        self.exit_code = exit_code
        self.detail = detail


class ServiceClient:
    """POSTs to either an in-process app or a remote server."""

    def __init__(self, server: str | None):
        self._server = server
        if server is None:
            from .service import create_app
            self._app = create_app()

    def post(self, path: str, body: dict) -> dict:
        if self._server is not None:
            try:
                with httpx.Client(base_url=self._server, timeout=None) as client:
                    resp = client.post(path, json=body)
            except httpx.HTTPError as exc:
                raise ServiceFailure(3, f"cannot reach {self._server}: {exc}")
        else:
            async def go():
                transport = httpx.ASGITransport(app=self._app)
                async with httpx.AsyncClient(transport=transport,
                                             base_url="http://service",
                                             timeout=None) as client:
                    return await client.post(path, json=body)
            resp = asyncio.run(go())
        if resp.status_code == 200:
            return resp.json()
        try:
            envelope = resp.json()
            error_type = envelope["error_type"]
            detail = envelope["detail"]
        except Exception:
            raise ServiceFailure(
                3, f"server error {resp.status_code}: {resp.text[:200]}")
        raise ServiceFailure(_EXIT_BY_ERROR_TYPE.get(error_type, 3), detail)


def _fmt(value) -> str:
    """One CSV cell: floats at 17 significant digits, None empty."""
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def _resolve_config(args) -> ExperimentConfig:
    if args.config is not None and args.preset is not None:
        raise ConfigError("give --config or --preset, not both")
    if args.config is not None:
        return load_config(args.config)
    if args.preset is not None:
        return preset(args.preset)
    return ExperimentConfig()


def _outdir(args, config: ExperimentConfig) -> Path:
    out = Path(args.out if args.out is not None else config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(outdir: Path, config: ExperimentConfig, command: str,
            timings: dict) -> None:
    _write_json(outdir / "config.json", config.model_dump(mode="json"))
    _write_json(outdir / "metadata.json", {
        "command": command,
        "package_version": __version__,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "timings": timings,
    })


def _config_body(config: ExperimentConfig) -> dict:
    return {"config": config.model_dump(mode="json")}


def _load_artifact(args, outdir: Path) -> dict:
    path = Path(args.basis) if args.basis is not None else outdir / "basis.json"
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read basis artifact {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"artifact {path} is not valid JSON: {exc}") from exc


def cmd_solve(args, config: ExperimentConfig, client: ServiceClient) -> int:
    body = _config_body(config)
    if args.r:
        body["params"] = list(args.r)
    out = client.post("/solve", body)
    outdir = _outdir(args, config)
    M = len(out["weights"][0])
    header = ["r", "zeta"] + [f"pi_{m + 1}" for m in range(M)] + ["E"]
    rows = [[r, z] + list(w) + [e]
            for r, z, w, e in zip(out["params"], out["zetas"],
                                  out["weights"], out["energies"])]
    _write_csv(outdir / "solve.csv", header, rows)
    _finish(outdir, config, "solve", out["timings"])
    worst = max(out["residuals"])
    print(f"solved {len(rows)} parameters; worst matching residual {worst:.3e}; "
          f"wrote {outdir / 'solve.csv'}")
    return 0


_HISTORY_COLUMNS = ["n", "max_error", "mean_error", "max_error_sq",
                    "mean_error_sq", "selected_index", "selected_param"]


def cmd_offline(args, config: ExperimentConfig, client: ServiceClient) -> int:
    out = client.post("/offline", _config_body(config))
    outdir = _outdir(args, config)
    artifact = out["artifact"]
    basis_path = Path(args.basis) if args.basis is not None else outdir / "basis.json"
    basis_path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(basis_path, artifact)
    history = artifact["error_history"]
    _write_csv(outdir / "history.csv", _HISTORY_COLUMNS,
               [[row[c] for c in _HISTORY_COLUMNS] for row in history])
    _finish(outdir, config, "offline", out["timings"])
    last = history[-1]
    print(f"selected {len(artifact['snapshots'])} of {config.training.count} "
          f"snapshots; final mean error {last['mean_error']:.6e}; "
          f"wrote {basis_path} and {outdir / 'history.csv'}")
    return 0


def cmd_online(args, config: ExperimentConfig, client: ServiceClient) -> int:
    outdir = _outdir(args, config)
    body = _config_body(config)
    body["artifact"] = _load_artifact(args, outdir)
    params: list[float] | None = list(args.r) if args.r else None
    if args.extrapolate:
        if params is None:
            params = [float(v) for v in config.test.grid()]
        for interval in config.extrapolation:
            params.extend(float(v) for v in interval.grid())
    if params is not None:
        body["params"] = params
    if args.sizes is not None:
        body["n_values"] = args.sizes
    if args.threads is not None:
        body["workers"] = args.threads
    out = client.post("/online", body)
    _write_json(outdir / "queries.json", out["records"])
    _write_csv(outdir / "decay.csv", ["n", "max_error", "mean_error", "min_error"],
               [[row["n"], row["max_error"], row["mean_error"], row["min_error"]]
                for row in out["summary"]])
    _finish(outdir, config, "online", out["timings"])
    sizes = out["n_values"]
    worst = {row["n"]: row["max_error"] for row in out["summary"]}
    spread = ", ".join(f"N={n}: {worst[n]:.3e}" for n in sizes if n in worst)
    print(f"{len(out['records'])} queries over sizes {sizes}; "
          f"max energy error {spread}; wrote {outdir / 'queries.json'} "
          f"and {outdir / 'decay.csv'}")
    return 0


def cmd_heatmap(args, config: ExperimentConfig, client: ServiceClient) -> int:
    outdir = _outdir(args, config)
    body = _config_body(config)
    body["artifact"] = _load_artifact(args, outdir)
    if args.r is not None:
        body["r"] = args.r
    out = client.post("/heatmap", body)
    axis = out["axis"]
    rows = []
    for i, l1 in enumerate(axis):
        for j, l2 in enumerate(axis):
            e = out["energies"][i][j]
            rows.append([l1, l2, math.nan if e is None else e])
    _write_csv(outdir / "heatmap.csv", ["lam_1", "lam_2", "energy"], rows)
    _write_json(outdir / "minima.json", out["minima"])
    _finish(outdir, config, "heatmap", out["timings"])
    print(f"scanned {len(axis)}x{len(axis)} weight grid at r={out['r']:g}; "
          f"{len(out['minima'])} grid-local minima; wrote "
          f"{outdir / 'heatmap.csv'} and {outdir / 'minima.json'}")
    return 0


def cmd_widths(args, config: ExperimentConfig, client: ServiceClient) -> int:
    out = client.post("/widths", _config_body(config))
    outdir = _outdir(args, config)
    slopes = {}
    for name in ("translate", "dimer"):
        curve = out[name]
        _write_csv(outdir / f"widths_{name}.csv", ["n", "delta_n"],
                   list(zip(curve["n_values"], curve["deltas"])))
        _write_json(outdir / f"widths_{name}.json", {
            "slope": curve["slope"],
            "window": curve["window"],
            "sample_count": curve["sample_count"],
        })
        slopes[name] = curve["slope"]
    _finish(outdir, config, "widths", out["timings"])
    print("width curves written to "
          + ", ".join(str(outdir / f"widths_{n}.csv") for n in ("translate", "dimer"))
          + "; slopes translate %.3f, dimer %.3f"
          % (slopes["translate"], slopes["dimer"]))
    return 0


def cmd_serve(args, config: ExperimentConfig, client: ServiceClient) -> int:
    import uvicorn

    from .service import create_app
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def _int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slater-rom",
        description=("Reduced-order modeling of 1D point-interaction "
                     "Schrodinger ground states."))
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="experiment config file (JSON)")
    common.add_argument("--preset", metavar="NAME",
                        help="bundled config preset (paper, small)")
    common.add_argument("--out", metavar="DIR",
                        help="output directory (default: config out_dir)")
    common.add_argument("--threads", type=int, metavar="INT",
                        help="worker processes for the online multistart")
    common.add_argument("--server", metavar="URL",
                        help="send requests to a running server instead of "
                             "computing in-process")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common],
                       help="exact ground states over a parameter list")
    p.add_argument("r", nargs="*", type=float,
                   help="parameters to solve at (default: test grid)")
    p.set_defaults(run=cmd_solve)

    p = sub.add_parser("offline", parents=[common],
                       help="greedy reduced-basis construction")
    p.add_argument("--basis", metavar="PATH",
                   help="where to write the artifact (default: OUT/basis.json)")
    p.set_defaults(run=cmd_offline)

    p = sub.add_parser("online", parents=[common],
                       help="reduced online queries against an artifact")
    p.add_argument("r", nargs="*", type=float,
                   help="query parameters (default: test grid)")
    p.add_argument("--basis", metavar="PATH",
                   help="artifact to load (default: OUT/basis.json)")
    p.add_argument("--sizes", type=_int_list, metavar="N1,N2,...",
                   help="basis-size prefixes to sweep (default: 2..N)")
    p.add_argument("--extrapolate", action="store_true",
                   help="append the configured extrapolation grids")
    p.set_defaults(run=cmd_online)

    p = sub.add_parser("heatmap", parents=[common],
                       help="reduced-energy landscape of a 2-element basis")
    p.add_argument("r", nargs="?", type=float, default=None,
                   help="query parameter (default: config heatmap.r)")
    p.add_argument("--basis", metavar="PATH",
                   help="artifact to load (default: OUT/basis.json)")
    p.set_defaults(run=cmd_heatmap)

    p = sub.add_parser("widths", parents=[common],
                       help="empirical width curves of the reference families")
    p.set_defaults(run=cmd_widths)

    p = sub.add_parser("serve", parents=[common],
                       help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(run=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _resolve_config(args)
        client = ServiceClient(args.server)
        return args.run(args, config, client)
    except ServiceFailure as exc:
        print(f"error: {exc.detail}", file=sys.stderr)
        return exc.exit_code
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SchemaError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return 4
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
