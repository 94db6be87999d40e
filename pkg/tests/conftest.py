"""Shared fixtures: one full pipeline run per mode, cached for the session.

The acceptance tests all read artifacts of the default-configuration
pipeline; running it once per mode keeps the suite inside the stated
runtime budgets.  Unit tests use only cheap synthetic fields.
"""

import json
import os

import pytest

from stripflow.cli import RunConfig, run_pipeline

_RUNS = {}


def _run_pipeline(mode: str, tmp_path_factory) -> tuple:
    """Run the full default pipeline for a mode once; return (outdir, report)."""
    if mode not in _RUNS:
        outdir = tmp_path_factory.mktemp(f"run_{mode}")
        cfg = RunConfig(mode=mode, outdir=str(outdir))
        saved = os.environ.pop("STRIPFLOW_OUTDIR", None)
        try:
            doc = run_pipeline(cfg)
        finally:
            if saved is not None:
                os.environ["STRIPFLOW_OUTDIR"] = saved
        _RUNS[mode] = (str(outdir), doc)
    return _RUNS[mode]


@pytest.fixture(scope="session")
def ramp_run(tmp_path_factory):
    return _run_pipeline("ramp", tmp_path_factory)


@pytest.fixture(scope="session")
def zero_run(tmp_path_factory):
    return _run_pipeline("zero", tmp_path_factory)


@pytest.fixture(scope="session", params=["ramp", "zero"])
def any_run(request, tmp_path_factory):
    return request.param, _run_pipeline(request.param, tmp_path_factory)


def load_timings(outdir: str) -> dict:
    with open(os.path.join(outdir, "timings.json")) as fh:
        return json.load(fh)
