"""Command-line client for the probing service.

Every subcommand builds a request and sends it through the FastAPI app —
in-process by default, or against a remote server with --server URL. Exit
codes: 0 success, 2 usage or configuration error, 3 missing data (expected
embedding files are listed), 4 internal error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_INTERNAL = 4

_EXIT_FOR_KIND = {"config": EXIT_CONFIG, "format": EXIT_CONFIG,
                  "missing_data": EXIT_MISSING, "internal": EXIT_INTERNAL}

POLL_INTERVAL = 2.0


class CliError(Exception):
    def __init__(self, message: str, code: int, missing: list[str] | None = None):
        super().__init__(message)
        self.code = code
        self.missing = missing or []


class ServiceClient:
    """Thin HTTP client; without --server it mounts the app in-process."""

    def __init__(self, server: str | None = None):
        self.remote = server is not None
        if self.remote:
            import httpx

            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app())

    def call(self, method: str, path: str, body: dict | None = None,
             params: dict | None = None) -> dict:
        try:
            resp = self._client.request(method, path, json=body, params=params)
        except Exception as e:  # connection-level failure
            raise CliError(f"service request failed: {e}", EXIT_INTERNAL) from e
        if resp.status_code == 422:
            raise CliError(f"invalid request: {resp.text}", EXIT_CONFIG)
        payload = resp.json()
        if resp.status_code >= 400:
            raise _error_from_detail(payload.get("detail"))
        return payload

    def run_job(self, path: str, body: dict) -> dict:
        """Submit a long operation; wait inline locally, poll when remote."""
        if not self.remote:
            job = self.call("POST", path, body, params={"wait": "true"})
        else:
            job = self.call("POST", path, body, params={"wait": "false"})
            while job["status"] in ("queued", "running"):
                time.sleep(POLL_INTERVAL)
                job = self.call("GET", f"/jobs/{job['id']}")
        if job["status"] == "error":
            raise _error_from_detail(job["error"])
        return job["result"]


def _error_from_detail(detail) -> CliError:
    if isinstance(detail, dict) and "kind" in detail:
        code = _EXIT_FOR_KIND.get(detail["kind"], EXIT_INTERNAL)
        return CliError(detail.get("message", "request failed"), code,
                        detail.get("missing"))
    return CliError(str(detail), EXIT_INTERNAL)


# --- argument parsing --------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quantprobe",
                                     description="Numeric-probing harness for token embeddings")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="generate a dataset to disk")
    _add_dataset_args(gen)
    gen.add_argument("--train", type=int, default=10_000, help="training examples")
    gen.add_argument("--test", type=int, default=1_000, help="test examples")
    gen.add_argument("-o", "--out", required=True, help="output directory")

    run = sub.add_parser("run", parents=[common],
                         help="run the multi-run probing protocol")
    _add_dataset_args(run)
    run.add_argument("--provider", required=True,
                     help="random | oracle | file:DIR (directory of .qpemb files)")
    run.add_argument("--runs", type=int, default=5, help="number of runs (default 5)")
    run.add_argument("--train", type=int, default=10_000)
    run.add_argument("--test", type=int, default=1_000)
    _add_train_args(run)
    run.add_argument("--grid", action="store_true",
                     help="pick lr/momentum by grid search on seed-1 before the runs")
    run.add_argument("--dim", type=int, default=768, help="embedding dim (random/oracle)")
    run.add_argument("--provider-seed", type=int, default=0, help="random-table seed")
    run.add_argument("--init-std", type=float, default=None,
                     help="random-table std (default dim^-0.5)")
    run.add_argument("--hidden-dim", type=int, default=0,
                     help="probe hidden dim override (0 = task default)")
    run.add_argument("--threads", type=int, default=None,
                     help="parallel runs (default $QUANTPROBE_THREADS or 1)")
    run.add_argument("-o", "--out", required=True, help="output directory")

    grid = sub.add_parser("grid", parents=[common], help="hyperparameter grid search")
    _add_dataset_args(grid)
    grid.add_argument("--provider", required=True, help="random | oracle")
    grid.add_argument("--train", type=int, default=10_000)
    grid.add_argument("--test", type=int, default=1_000)
    _add_train_args(grid)
    grid.add_argument("--lr-grid", default=None, help="comma-separated lr values")
    grid.add_argument("--momentum-grid", default=None, help="comma-separated momenta")
    grid.add_argument("--dim", type=int, default=768)
    grid.add_argument("--provider-seed", type=int, default=0)
    grid.add_argument("--init-std", type=float, default=None)
    grid.add_argument("--hidden-dim", type=int, default=0)
    grid.add_argument("-o", "--out", default=None, help="directory for grid.json")

    report = sub.add_parser("report", parents=[common],
                            help="render a text table from report CSV files")
    report.add_argument("csv", nargs="+", help="report.csv files")
    report.add_argument("-o", "--out", default=None, help="write the table here too")

    expect = sub.add_parser("expect", parents=[common],
                            help="print the QPEMB files a file provider will demand")
    expect.add_argument("--dir", required=True, help="directory produced by gen")
    expect.add_argument("--dim", type=int, default=768, help="expected embedding dim")

    sub.add_parser("selftest", parents=[common], help="run the pipeline self-checks")

    serve = sub.add_parser("serve", help="start the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)

    return parser


def _add_dataset_args(p: argparse.ArgumentParser):
    p.add_argument("--task", required=True,
                   help="percent | basispoint | order | range | addition | unitid")
    p.add_argument("--lo", type=float, required=True, help="range lower bound")
    p.add_argument("--hi", type=float, required=True, help="range upper bound")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lexicon", default=None, help="unit lexicon file (default: shipped)")
    p.add_argument("--log-base", default="10", choices=["10", "e"],
                   help="log base for order targets")


def _add_train_args(p: argparse.ArgumentParser):
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--momentum", type=float, default=0.5)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--clip-norm", type=float, default=5.0)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--val-fraction", type=float, default=0.1)


def _log_base(args) -> float:
    return 10.0 if args.log_base == "10" else math.e


def _settings(args) -> dict:
    return {"lr": args.lr, "momentum": args.momentum, "batch_size": args.batch_size,
            "clip_norm": args.clip_norm, "max_epochs": args.max_epochs,
            "patience": args.patience, "val_fraction": args.val_fraction}


def _provider(args) -> dict:
    text = args.provider.strip()
    if text in ("random", "oracle"):
        return {"kind": text, "dim": args.dim, "seed": args.provider_seed,
                "init_std": args.init_std}
    if text.startswith("file:"):
        return {"kind": "file", "dim": args.dim, "seed": args.provider_seed,
                "path": text[5:]}
    raise CliError(f"unknown provider {text!r}; expected random, oracle, or file:DIR",
                   EXIT_CONFIG)


# --- commands ----------------------------------------------------------------


def cmd_gen(client: ServiceClient, args) -> int:
    body = {"task": args.task, "lo": args.lo, "hi": args.hi, "seed": args.seed,
            "train_n": args.train, "test_n": args.test, "lexicon": args.lexicon,
            "log_base": _log_base(args), "out_dir": args.out}
    resp = client.call("POST", "/datasets/generate", body)
    for split in ("train", "test"):
        print(f"{split}: {resp['files'][split]}  sha256={resp['sha256'][split]}")
    print("expected embeddings:",
          ", ".join(resp["expected_embeddings"][s] for s in ("train", "test")))
    return EXIT_OK


def cmd_run(client: ServiceClient, args) -> int:
    body = {"task": args.task, "lo": args.lo, "hi": args.hi, "provider": _provider(args),
            "runs": args.runs, "seed": args.seed, "train_n": args.train,
            "test_n": args.test, "grid": args.grid, "settings": _settings(args),
            "lexicon": args.lexicon, "log_base": _log_base(args),
            "hidden_dim": args.hidden_dim, "out_dir": args.out, "threads": args.threads}
    result = client.run_job("/experiments", body)
    print(result["table"], end="")
    std = "" if result["std"] is None else f" ± {result['std']:.6g}"
    print(f"\n{result['metric_kind']} mean over {len(result['runs'])} run(s): "
          f"{result['mean']:.6g}{std}  (diverged: {result['diverged_count']}, "
          f"lr={result['lr']:g}, momentum={result['momentum']:g})")
    print(f"report written to {args.out}")
    return EXIT_OK


def cmd_grid(client: ServiceClient, args) -> int:
    body = {"task": args.task, "lo": args.lo, "hi": args.hi, "provider": _provider(args),
            "seed": args.seed, "train_n": args.train, "test_n": args.test,
            "settings": _settings(args), "lexicon": args.lexicon,
            "log_base": _log_base(args), "hidden_dim": args.hidden_dim,
            "out_dir": args.out}
    if args.lr_grid:
        body["lr_grid"] = [float(v) for v in args.lr_grid.split(",")]
    if args.momentum_grid:
        body["momentum_grid"] = [float(v) for v in args.momentum_grid.split(",")]
    result = client.run_job("/grid", body)
    for cell in result["cells"]:
        flag = " diverged" if cell["diverged"] else ""
        print(f"lr={cell['lr']:<8g} momentum={cell['momentum']:<4g} "
              f"val_loss={cell['best_val_loss']:.6g} best_epoch={cell['best_epoch']}{flag}")
    print(f"chosen: lr={result['lr']:g} momentum={result['momentum']:g}")
    return EXIT_OK


def cmd_report(client: ServiceClient, args) -> int:
    resp = client.call("POST", "/reports/render", {"csv_paths": args.csv})
    print(resp["table"], end="")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(resp["table"])
    return EXIT_OK


def cmd_expect(client: ServiceClient, args) -> int:
    resp = client.call("POST", "/datasets/expect", {"dir": args.dir, "dim": args.dim})
    for f in resp["files"]:
        print(f"{f['split']}: {f['qpemb']}  (dataset {f['dataset']})")
    print(f"dim: {resp['dim']}")
    return EXIT_OK


def cmd_selftest(client: ServiceClient, args) -> int:
    resp = client.call("POST", "/selftest")
    for check in resp["checks"]:
        status = "ok" if check["ok"] else "FAIL"
        print(f"[{status}] {check['name']}: {check['detail']}")
    return EXIT_OK if resp["ok"] else EXIT_INTERNAL


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return cmd_serve(args)
        client = ServiceClient(args.server)
        handler = {"gen": cmd_gen, "run": cmd_run, "grid": cmd_grid,
                   "report": cmd_report, "expect": cmd_expect,
                   "selftest": cmd_selftest}[args.command]
        return handler(client, args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        for name in e.missing:
            print(f"  missing: {name}", file=sys.stderr)
        return e.code
    except KeyboardInterrupt:
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
