from flask import Blueprint, request
from pydantic import BaseModel, Field

from . import polytope
from .core import DofPoint, UserSubset, format_rational, parse_rational
from .utils import coordinates, error_response, json_errors, json_response, no_cache, parse_vector

bp = Blueprint("api_bounds", __name__)


class RegionQuery(BaseModel):
    users: int = Field(ge=1, le=16)
    perfect: int = Field(ge=0)
    private: bool = False
    slice: dict[str, str] = Field(default_factory=dict)

    def region(self):
        fixes = {UserSubset.from_label(k): parse_rational(v) for k, v in self.slice.items()}
        return polytope.build_region(self.users, self.perfect, self.private, fixes)


class BoundsQuery(RegionQuery):
    irredundant: bool = False


class CheckQuery(RegionQuery):
    point: str


class MaximizeQuery(RegionQuery):
    weights: str | None = None


class FeasQuery(BaseModel):
    users: int = Field(default=3, ge=1, le=16)
    perfect: int = Field(default=1, ge=0)
    residual: dict[str, int]
    slots: int = Field(ge=0)


def _payload():
    data = request.get_json(silent=True)
    if not isinstance(data, dict):
        return None
    return data


def _inequality(row) -> dict:
    return {
        "inequality": str(row),
        "coefficients": {s.label: format_rational(c) for s, c in row.coefficients},
        "rhs": format_rational(row.rhs),
        "provenance": str(row.provenance),
    }


@bp.route("/api/bounds", methods=["POST"])
@no_cache
@json_errors
def list_bounds():
    """Outer-bound inequalities for (users, perfect), optionally private-only and sliced."""
    data = _payload()
    if data is None:
        return error_response("JSON body is required", 400)
    query = BoundsQuery(**data)
    region = query.region()
    if query.irredundant:
        region = polytope.remove_redundant(region)
    return json_response(
        {
            "success": True,
            "variables": [s.label for s in region.variables],
            "inequalities": [_inequality(row) for row in region],
        }
    )


@bp.route("/api/check", methods=["POST"])
@no_cache
@json_errors
def check_point():
    """Membership verdict and classification of one point."""
    data = _payload()
    if data is None:
        return error_response("JSON body is required", 400)
    query = CheckQuery(**data)
    region = query.region()
    point = DofPoint(query.users, parse_vector(query.point, region.variables))
    verdict = polytope.contains(region, point)
    return json_response(
        {"success": True, **verdict.to_dict(), "classification": polytope.classify_point(region, point)}
    )


@bp.route("/api/maximize", methods=["POST"])
@no_cache
@json_errors
def maximize():
    data = _payload()
    if data is None:
        return error_response("JSON body is required", 400)
    query = MaximizeQuery(**data)
    region = query.region()
    if query.weights:
        weights = parse_vector(query.weights, region.variables)
    else:
        weights = {s: 1 for s in region.variables}
    value, point = polytope.maximize(region, weights)
    return json_response(
        {
            "success": True,
            "variables": [s.label for s in region.variables],
            "value": format_rational(value),
            "argpoint": coordinates(point, region.variables),
        }
    )


@bp.route("/api/vertices", methods=["POST"])
@no_cache
@json_errors
def list_vertices():
    """Exact vertices of a region with at most four free variables."""
    data = _payload()
    if data is None:
        return error_response("JSON body is required", 400)
    region = RegionQuery(**data).region()
    points = polytope.vertices(region)
    return json_response(
        {
            "success": True,
            "variables": [s.label for s in region.variables],
            "vertices": [coordinates(p, region.variables) for p in points],
        }
    )


@bp.route("/api/feas", methods=["POST"])
@no_cache
@json_errors
def extension_feasibility():
    data = _payload()
    if data is None:
        return error_response("JSON body is required", 400)
    query = FeasQuery(**data)
    demand = polytope.ResidualDemand.of(
        {UserSubset.from_label(k): v for k, v in query.residual.items()}, query.slots
    )
    verdict = polytope.extension_feasibility(query.users, query.perfect, demand)
    return json_response({"success": True, **verdict.to_dict()})
