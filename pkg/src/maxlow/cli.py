from __future__ import annotations

from collections.abc import Callable, Iterator
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import TypeVar

import typer
from pydantic import ValidationError

from maxlow.config import settings
from maxlow.errors import ConfigError, MeshError, SolverError
from maxlow.schemas import RunConfig, parse_levels

app = typer.Typer(no_args_is_help=True)

T = TypeVar("T")

EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3


@contextmanager
def _exit_codes() -> Iterator[None]:
    try:
        yield
    except (ConfigError, MeshError, OSError) as exc:
        typer.echo(f"error: {exc}", err=True)
        raise typer.Exit(EXIT_CONFIG) from exc
    except SolverError as exc:
        typer.echo(f"solver error: {exc}", err=True)
        raise typer.Exit(EXIT_SOLVER) from exc


def _config(
    domain: str | None,
    mesh: str | None,
    levels: str,
    **options,
) -> RunConfig:
    defaults = {
        "threads": settings.threads,
        "seed": settings.seed,
        "eig_tol": settings.eig_tol,
        "power_tol": settings.power_tol,
        "power_max_iter": settings.power_max_iter,
        "kappa_method": settings.kappa_method,
        "tilde_c_normalization": settings.tilde_c_normalization,
        "c1_div": settings.c1_div,
        "constants_floor_level": settings.constants_floor_level,
    }
    defaults.update({key: value for key, value in options.items() if value is not None})
    if mesh is not None and not (
        Path(mesh).exists() or (Path(settings.meshes_root) / mesh).exists()
    ):
        raise ConfigError(f"mesh file not found: {mesh}")
    try:
        return RunConfig(domain=domain, mesh=mesh, levels=parse_levels(levels), **defaults)
    except ValidationError as exc:
        messages = "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or 'config'}: {error['msg']}"
            for error in exc.errors()
        )
        raise ConfigError(messages) from None


def _per_level(config: RunConfig, job: Callable[[int], T]) -> list[T]:
    with ThreadPoolExecutor(max_workers=config.threads) as pool:
        return list(pool.map(job, config.levels))


def _emit(text: str, out: str | None) -> None:
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        typer.echo(f"wrote {path}")
    else:
        typer.echo(text, nl=False)


@app.command()
def show_config() -> None:
    for key, value in settings.model_dump().items():
        typer.echo(f"{key}={value}")


@app.command()
def constants(
    domain: str | None = None,
    mesh: str | None = None,
    levels: str = "1",
    format: str = "csv",
    tilde_c_normalization: str | None = None,
    c1div: str | None = None,
    threads: int | None = None,
    seed: int | None = None,
    out: str | None = None,
) -> None:
    """Compute every local constant of the bound chain."""
    from maxlow.constants import PatchCache, compute_constants
    from maxlow.eigenbounds import mesh_for
    from maxlow.logging_config import setup_logging
    from maxlow.render import render_constants

    setup_logging()
    with _exit_codes():
        config = _config(
            domain,
            mesh,
            levels,
            format=format,
            tilde_c_normalization=tilde_c_normalization,
            c1_div=c1div,
            threads=threads,
            seed=seed,
            out=out,
        )
        cache = PatchCache(settings.geometry_cache)
        reports = [
            (
                level,
                compute_constants(
                    mesh_for(config.source, level),
                    normalization=config.tilde_c_normalization,
                    c1_div_override=config.c1_div_override,
                    threads=config.threads,
                    cache=cache,
                    eig_tol=config.eig_tol,
                ),
            )
            for level in config.levels
        ]
        _emit(render_constants(reports, config.format), config.out)


@app.command()
def kappa(
    domain: str | None = None,
    mesh: str | None = None,
    levels: str = "1",
    format: str = "csv",
    method: str | None = None,
    threads: int | None = None,
    seed: int | None = None,
    out: str | None = None,
) -> None:
    """Hypercircle constant kappa_h per level."""
    from maxlow.eigenbounds import mesh_for
    from maxlow.galerkin import kappa_h
    from maxlow.logging_config import setup_logging
    from maxlow.render import render_kappa

    setup_logging()
    with _exit_codes():
        config = _config(
            domain,
            mesh,
            levels,
            format=format,
            kappa_method=method,
            threads=threads,
            seed=seed,
            out=out,
        )

        def job(level: int):
            grid = mesh_for(config.source, level)
            result = kappa_h(
                grid,
                method=config.kappa_method,
                tol=config.power_tol,
                max_iter=config.power_max_iter,
                seed=config.seed,
            )
            return level, grid.h_max / 2**0.5, result

        _emit(render_kappa(_per_level(config, job), config.format), config.out)


@app.command()
def evp(
    domain: str | None = None,
    mesh: str | None = None,
    levels: str = "1",
    k: int = typer.Option(1, "-k", "--k"),
    format: str = "csv",
    threads: int | None = None,
    out: str | None = None,
) -> None:
    """Discrete Maxwell eigenvalues per level, one per limit on the built-in domains."""
    from maxlow.eigenbounds import mesh_for, tabulated_eigenvalues
    from maxlow.logging_config import setup_logging
    from maxlow.render import render_eigenvalues

    setup_logging()
    with _exit_codes():
        config = _config(domain, mesh, levels, k=k, format=format, threads=threads, out=out)

        def job(level: int):
            grid = mesh_for(config.source, level)
            found = tabulated_eigenvalues(grid, config.k, config.source, config.eig_tol)
            return level, found.values

        _emit(render_eigenvalues(_per_level(config, job), config.format), config.out)


@app.command()
def bounds(
    domain: str | None = None,
    mesh: str | None = None,
    levels: str = "1",
    k: int = typer.Option(1, "-k", "--k"),
    format: str = "csv",
    tilde_c_normalization: str | None = None,
    c1div: str | None = None,
    threads: int | None = None,
    seed: int | None = None,
    out: str | None = None,
) -> None:
    """Guaranteed lower eigenvalue bounds per level."""
    from maxlow.eigenbounds import run_pipeline
    from maxlow.logging_config import setup_logging
    from maxlow.render import render_bounds

    setup_logging()
    with _exit_codes():
        config = _config(
            domain,
            mesh,
            levels,
            k=k,
            format=format,
            tilde_c_normalization=tilde_c_normalization,
            c1_div=c1div,
            threads=threads,
            seed=seed,
            out=out,
        )
        rows = run_pipeline(config)
        _emit(render_bounds(rows, config.format, config.k), config.out)
    failed = [row.level for row in rows if row.status != "ok"]
    if failed:
        typer.echo(f"failed levels: {', '.join(map(str, failed))}", err=True)


@app.command()
def validate(
    domain: str | None = None,
    mesh: str | None = None,
    levels: str = "1",
    format: str = "csv",
    samples: int = 200,
    threads: int | None = None,
    seed: int | None = None,
    out: str | None = None,
) -> None:
    """Run the property suite; exits with 1 when any property fails."""
    from maxlow.eigenbounds import mesh_for
    from maxlow.logging_config import setup_logging
    from maxlow.render import render_validation
    from maxlow.validation import run_validation

    setup_logging()
    with _exit_codes():
        config = _config(
            domain, mesh, levels, format=format, threads=threads, seed=seed, out=out
        )
        reports = _per_level(
            config,
            lambda level: run_validation(
                mesh_for(config.source, level),
                source=config.source,
                level=level,
                seed=config.seed,
                samples=samples,
            ),
        )
        _emit(render_validation(reports, config.format), config.out)
    if not all(report.passed for report in reports):
        raise typer.Exit(EXIT_VALIDATION)
