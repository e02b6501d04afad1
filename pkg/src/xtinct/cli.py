"""Command-line client for the xtinct service.

Subcommands build the same JSON requests the HTTP API accepts and send
them either to an in-process service instance (default; no socket
involved) or to a remote server given with --server.  Every subcommand
writes its resolved request next to its outputs as
``<out>.runconfig.json``; re-running with ``--config`` on that file
reproduces the outputs byte for byte.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__

_DEFAULT_STEP = {"cubic": 0.05, "tetragonal": 0.25, "trigonal+hexagonal": 0.25}


class CliError(click.ClickException):
    exit_code = 1


class InProcessClient:
    """Synchronous bridge onto an ASGI app; no socket involved."""

    def __init__(self, app):
        self._app = app

    def _request(self, method: str, path: str, **kwargs):
        import asyncio

        import httpx

        async def go():
            transport = httpx.ASGITransport(app=self._app)
            async with httpx.AsyncClient(
                transport=transport, base_url="http://xtinct.internal", timeout=None
            ) as client:
                return await client.request(method, path, **kwargs)

        return asyncio.run(go())

    def get(self, path, params=None):
        return self._request("GET", path, params=params)

    def post(self, path, json=None):
        return self._request("POST", path, json=json)


def _make_client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    from .service import create_app

    return InProcessClient(create_app())


def _call(server: str | None, method: str, path: str, payload: dict | None = None):
    client = _make_client(server)
    try:
        if method == "GET":
            resp = client.get(path, params=payload)
        else:
            resp = client.post(path, json=payload)
    except click.ClickException:
        raise
    except Exception as exc:
        raise CliError(f"{path}: {exc}") from exc
    finally:
        if hasattr(client, "close") and server:
            client.close()
    if resp.status_code in (400, 404, 422):
        try:
            detail = resp.json().get("detail")
        except Exception:
            detail = resp.text
        raise click.UsageError(f"{path}: {detail}")
    if resp.status_code != 200:
        raise CliError(f"{path} failed with HTTP {resp.status_code}: {resp.text[:500]}")
    return resp.json()


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise click.UsageError(f"cannot read config {path}: {exc}") from exc


def _resolve(flag_value, config: dict, key: str, default):
    """Explicit flag > config file > built-in default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


def _write_runconfig(out_stem: str, command: str, request: dict) -> None:
    path = Path(f"{out_stem}.runconfig.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = {"command": command, "request": request}
    path.write_text(
        json.dumps(blob, sort_keys=True, separators=(",", ":")), encoding="utf-8"
    )


def _write_json(data: dict, out: str | None) -> None:
    text = json.dumps(data, indent=2, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)


def _parse_range(text: str, name: str) -> tuple[float, float]:
    try:
        lo, hi = text.split(":")
        return float(lo), float(hi)
    except ValueError:
        raise click.UsageError(f"{name} must look like '5:15', got {text!r}") from None


def _parse_split(text: str) -> tuple[int, int]:
    try:
        train, test = text.split(":")
        return int(train), int(test)
    except ValueError:
        raise click.UsageError(f"--split must look like '5:1', got {text!r}") from None


@click.group()
@click.version_option(version=__version__, prog_name="xtinct")
@click.option("--server", default=None, envvar="XTINCT_SERVER",
              help="Remote service URL; default runs the service in-process.")
@click.pass_context
def main(ctx, server):
    """Powder-diffraction dataset factory and analysis toolkit."""
    ctx.ensure_object(dict)
    ctx.obj["server"] = server


@main.command()
@click.option("--family", default=None, help="cubic | tetragonal | trigonal+hexagonal")
@click.option("--h-max", type=int, default=None)
@click.option("--out", default=None, help="Write the report JSON here.")
@click.option("--config", default=None, help="Load defaults from a runconfig file.")
@click.pass_context
def classes(ctx, family, h_max, out, config):
    """Extinction-class partition and theoretical top-k accuracy ceiling."""
    cfg = _load_config(config).get("request", _load_config(config))
    request = {
        "family": _resolve(family, cfg, "family", None),
        "h_max": _resolve(h_max, cfg, "h_max", 8),
    }
    if not request["family"]:
        raise click.UsageError("--family is required")
    report = _call(ctx.obj["server"], "POST", "/classes", request)
    _write_json(report, out)
    if out:
        _write_runconfig(Path(out).with_suffix(""), "classes", request)
        pct = report["theoretical_topk_pct"]
        click.echo(
            f"{report['family']}: {report['n_classes']} classes / "
            f"{report['n_groups']} groups; top-1..5 ceiling: "
            + " ".join(f"{pct[str(k)]:.1f}%" for k in range(1, 6))
        )


@main.command()
@click.option("--family", default=None)
@click.option("--a-range", default=None, help="Lattice a range, e.g. 5:15")
@click.option("--c-range", default=None, help="Lattice c range (multi-parameter families)")
@click.option("--step", type=float, default=None, help="Grid step in Angstrom")
@click.option("--patterns-per-lattice", type=int, default=None)
@click.option("--fwhm", type=float, default=None)
@click.option("--wavelength", type=float, default=None)
@click.option("--window", default=None, help="two-theta window, e.g. 10:110")
@click.option("--points", type=int, default=None, help="Samples per pattern")
@click.option("--split", "split_ratio", default=None, help="train:test, e.g. 5:1")
@click.option("--split-unit", default=None, type=click.Choice(["replicate", "lattice-point"]))
@click.option("--seed", type=int, default=None)
@click.option("--imbalance-file", default=None,
              help="Per-group ranges ('sg param min max step' lines); switches to the imbalanced build.")
@click.option("--threads", type=int, default=None)
@click.option("--out", default=None, help="Output stem for artifacts.")
@click.option("--config", default=None)
@click.pass_context
def gen(ctx, family, a_range, c_range, step, patterns_per_lattice, fwhm, wavelength,
        window, points, split_ratio, split_unit, seed, imbalance_file, threads, out, config):
    """Generate a mesh-grid dataset (train/test artifacts plus metadata)."""
    cfg = _load_config(config).get("request", _load_config(config))
    family = _resolve(family, cfg, "family", None)
    if not family:
        raise click.UsageError("--family is required")
    out = _resolve(out, cfg, "out", None)
    if not out:
        raise click.UsageError("--out is required")

    if step is not None and step <= 0:
        raise click.UsageError(f"--step must be > 0, got {step}")

    request = dict(cfg) if cfg else {}
    if a_range or "axes" not in request:
        fam_l = family.strip().lower().replace("_", "+").replace("-", "+")
        default_step = _DEFAULT_STEP.get("cubic" if "cub" in fam_l else
                                         "tetragonal" if "tetr" in fam_l else
                                         "trigonal+hexagonal", 0.25)
        eff_step = step if step is not None else default_step
        lo, hi = _parse_range(a_range or "5:15", "--a-range")
        axes = {"a": {"min": lo, "max": hi, "step": eff_step}}
        if "cub" not in fam_l:
            clo, chi = _parse_range(c_range or a_range or "5:15", "--c-range")
            axes["c"] = {"min": clo, "max": chi, "step": eff_step}
        request["axes"] = axes
    request["family"] = family
    request["out"] = out
    if patterns_per_lattice is not None or "patterns_per_lattice" not in request:
        request["patterns_per_lattice"] = (
            patterns_per_lattice if patterns_per_lattice is not None else 1
        )
    pattern = request.get("pattern", {})
    for key, value in [("fwhm", fwhm), ("wavelength", wavelength),
                       ("n_points", points), ("seed", seed)]:
        if value is not None:
            pattern[key] = value
    if window is not None:
        lo, hi = _parse_range(window, "--window")
        pattern["two_theta_min"], pattern["two_theta_max"] = lo, hi
    request["pattern"] = pattern
    split = request.get("split", {})
    if split_ratio is not None:
        split["train_parts"], split["test_parts"] = _parse_split(split_ratio)
    if split_unit is not None:
        split["unit"] = split_unit
    if seed is not None:
        split.setdefault("seed", seed)
    request["split"] = split
    if threads is not None:
        request["threads"] = threads
    if imbalance_file is not None:
        from .builder import read_override_file

        try:
            overrides = read_override_file(imbalance_file)
        except (OSError, ValueError) as exc:
            raise click.UsageError(str(exc)) from exc
        request["overrides"] = {
            str(sg): {p: ax.as_dict() for p, ax in ov.items()}
            for sg, ov in overrides.items()
        }
        request["imbalanced"] = True

    result = _call(ctx.obj["server"], "POST", "/generate", request)
    _write_runconfig(out, "gen", request)
    click.echo(
        f"wrote {result['train_path']} ({result['n_train']} samples) and "
        f"{result['test_path']} ({result['n_test']} samples)"
    )


@main.command()
@click.option("--in", "source", default=None, help="JSON-lines line-pattern file.")
@click.option("--apply-lorentz/--no-apply-lorentz", default=None)
@click.option("--fwhm", type=float, default=None)
@click.option("--wavelength", type=float, default=None)
@click.option("--window", default=None)
@click.option("--points", type=int, default=None)
@click.option("--split", "split_ratio", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", default=None)
@click.option("--config", default=None)
@click.pass_context
def ingest(ctx, source, apply_lorentz, fwhm, wavelength, window, points,
           split_ratio, seed, out, config):
    """Render externally computed line patterns into a dataset artifact."""
    cfg = _load_config(config).get("request", _load_config(config))
    request = dict(cfg) if cfg else {}
    source = source if source is not None else request.get("path")
    out = out if out is not None else request.get("out")
    if not source:
        raise click.UsageError("--in is required")
    if not out:
        raise click.UsageError("--out is required")
    request["path"] = str(source)
    request["out"] = out
    if apply_lorentz is not None:
        request["apply_lorentz"] = apply_lorentz
    pattern = request.get("pattern", {})
    for key, value in [("fwhm", fwhm), ("wavelength", wavelength),
                       ("n_points", points), ("seed", seed)]:
        if value is not None:
            pattern[key] = value
    if window is not None:
        lo, hi = _parse_range(window, "--window")
        pattern["two_theta_min"], pattern["two_theta_max"] = lo, hi
    request["pattern"] = pattern
    split = request.get("split", {})
    if split_ratio is not None:
        split["train_parts"], split["test_parts"] = _parse_split(split_ratio)
    request["split"] = split

    result = _call(ctx.obj["server"], "POST", "/ingest", request)
    _write_runconfig(out, "ingest", request)
    click.echo(
        f"wrote {result['train_path']} ({result['n_train']}) and "
        f"{result['test_path']} ({result['n_test']}); "
        f"dropped {result['dropped_peaks']} peaks, "
        f"skipped {result['skipped_records']} records"
    )


@main.command("eval")
@click.option("--train", default=None)
@click.option("--test", default=None)
@click.option("--neighbors", type=int, default=None)
@click.option("--relabel-by-class", is_flag=True, default=None)
@click.option("--h-max", type=int, default=None)
@click.option("--out", default=None, help="Write the evaluation report JSON here.")
@click.option("--config", default=None)
@click.pass_context
def eval_cmd(ctx, train, test, neighbors, relabel_by_class, h_max, out, config):
    """k-NN baseline evaluation: top-k accuracies and confusion matrix."""
    cfg = _load_config(config).get("request", _load_config(config))
    request = {
        "train": _resolve(train, cfg, "train", None),
        "test": _resolve(test, cfg, "test", None),
        "neighbors": _resolve(neighbors, cfg, "neighbors", 5),
        "relabel_by_class": _resolve(relabel_by_class or None, cfg, "relabel_by_class", False),
        "h_max": _resolve(h_max, cfg, "h_max", 8),
    }
    if not request["train"] or not request["test"]:
        raise click.UsageError("--train and --test are required")
    report = _call(ctx.obj["server"], "POST", "/evaluate", request)
    _write_json(report, out)
    if out:
        _write_runconfig(Path(out).with_suffix(""), "eval", request)
    acc = report["topk_accuracy"]
    click.echo("top-k accuracy: " + " ".join(
        f"k={k}:{acc[str(k)]:.4f}" for k in range(1, len(acc) + 1)))


@main.command()
@click.option("--meta", default=None, help="Dataset file or its .meta.json sidecar.")
@click.option("--bin-width", type=float, default=None)
@click.option("--out", default=None)
@click.option("--config", default=None)
@click.pass_context
def hist(ctx, meta, bin_width, out, config):
    """Lattice-parameter histogram from dataset metadata."""
    cfg = _load_config(config).get("request", _load_config(config))
    request = {
        "meta": _resolve(meta, cfg, "meta", None),
        "bin_width": _resolve(bin_width, cfg, "bin_width", 0.2),
    }
    if not request["meta"]:
        raise click.UsageError("--meta is required")
    report = _call(ctx.obj["server"], "POST", "/histogram", request)
    _write_json(report, out)
    if out:
        _write_runconfig(Path(out).with_suffix(""), "hist", request)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--table", default=None, help="Alternative space-group table file.")
def serve(host, port, table):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(table), host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
