from flask import Blueprint, current_app, request
from pydantic import BaseModel, Field

from .core import UserSubset
from .engine import Mode, simulate
from .rates import dof_slope
from .schemedsl import builtin, builtin_names, claimed_dof, parse_scheme, validate
from .utils import coordinates, error_response, json_errors, json_response, no_cache

bp = Blueprint("api_schemes", __name__)


class SchemeRef(BaseModel):
    """Either a built-in name or the scheme text itself."""

    name: str | None = None
    text: str | None = None

    def scheme(self):
        if self.text is not None:
            return parse_scheme(self.text)
        if self.name is None:
            raise ValueError("give either 'name' or 'text'")
        return load_builtin(self.name)


class SimulateQuery(SchemeRef):
    trials: int = Field(default=100, ge=1)
    seed: int | None = Field(default=None, ge=0)
    mode: Mode | None = None
    validate_first: bool = True


class RateQuery(SchemeRef):
    seed: int | None = Field(default=None, ge=0)
    snr_db: tuple[float, float] = (60.0, 100.0)


def load_builtin(name: str):
    # only built-in names here: the API never reads paths from the server's disk
    return parse_scheme(builtin(name))


def _settings():
    return current_app.config["DOFLAB_SETTINGS"]


def _payload():
    data = request.get_json(silent=True)
    return data if isinstance(data, dict) else None


def _axes(K: int):
    return [UserSubset.of(i) for i in range(1, K + 1)]


@bp.route("/api/schemes", methods=["GET"])
@json_errors
def list_schemes():
    return json_response({"success": True, "schemes": builtin_names()})


@bp.route("/api/schemes/<name>", methods=["GET"])
@json_errors
def get_scheme(name: str):
    """Built-in scheme text plus a short summary."""
    text = builtin(name)
    scheme = parse_scheme(text)
    return json_response(
        {
            "success": True,
            "name": scheme.name,
            "users": scheme.K,
            "antennas": scheme.M,
            "slots": scheme.T,
            "claimed_dof": coordinates(claimed_dof(scheme), _axes(scheme.K)),
            "text": text,
        }
    )


@bp.route("/api/schemes/validate", methods=["POST"])
@no_cache
@json_errors
def validate_scheme():
    data = _payload()
    if data is None:
        return error_response("JSON body is required", 400)
    try:
        scheme = SchemeRef(**data).scheme()
    except ValueError as e:
        return error_response(str(e), 400)
    return json_response({"success": True, **validate(scheme).to_dict()})


@bp.route("/api/schemes/simulate", methods=["POST"])
@no_cache
@json_errors
def simulate_scheme():
    """Runs the rank-based decodability simulation; trials are capped by DOFLAB_MAX_TRIALS."""
    data = _payload()
    if data is None:
        return error_response("JSON body is required", 400)
    query = SimulateQuery(**data)
    settings = _settings()
    if query.trials > settings.max_trials:
        return error_response(f"at most {settings.max_trials} trials per request", 400)
    try:
        scheme = query.scheme()
    except ValueError as e:
        return error_response(str(e), 400)
    if query.validate_first:
        report = validate(scheme)
        if not report.ok:
            return json_response({"error": "scheme failed validation", "success": False, **report.to_dict()}, 422)
    result = simulate(
        scheme,
        query.trials,
        settings.seed if query.seed is None else query.seed,
        query.mode or settings.mode,
        settings.threads,
    )
    return json_response({"success": True, **result.to_dict()})


@bp.route("/api/schemes/rate", methods=["POST"])
@no_cache
@json_errors
def rate_scheme():
    data = _payload()
    if data is None:
        return error_response("JSON body is required", 400)
    query = RateQuery(**data)
    try:
        scheme = query.scheme()
    except ValueError as e:
        return error_response(str(e), 400)
    seed = _settings().seed if query.seed is None else query.seed
    rates = dof_slope(scheme, seed, query.snr_db)
    return json_response(
        {
            "success": True,
            "scheme": scheme.name,
            "seed": seed,
            "snr_db": list(query.snr_db),
            "receivers": [r.to_dict() for r in rates],
        }
    )
