"""Order-flow statistics, impact model calibration and synthetic markets."""

import json

from ._core import *  # noqa: F401,F403
from ._core import PropkitError, __version__, roundtrip as _roundtrip, run_pipeline as _run_pipeline


def as_dict(obj):
    """JSON form of any result object with a ``to_json`` method."""
    return json.loads(obj.to_json())


def run_pipeline(**config):
    """Run the report pipeline; keyword arguments are run config keys."""
    return [json.loads(s) for s in _run_pipeline(json.dumps(config))]


def roundtrip(**config):
    """Generate, recalibrate and check against the generating kernel."""
    return json.loads(_roundtrip(json.dumps(config)))
