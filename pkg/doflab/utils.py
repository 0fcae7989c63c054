from functools import wraps

import msgspec
from flask import Response, current_app, make_response
from pydantic import ValidationError

from .core import DofPoint, UserSubset, format_rational, parse_rational, split_pairs
from .errors import (
    CapabilityError,
    DimensionError,
    DofLabError,
    EmptyRegionError,
    InfeasiblePrecoderError,
    ParameterError,
    SchemeSyntaxError,
    UnknownSchemeError,
)


def to_json(document) -> str:
    """Stable two-space-indented JSON for structured output."""
    return msgspec.json.format(msgspec.json.encode(document), indent=2).decode() + "\n"


def coordinates(point: DofPoint, variables) -> list[str]:
    return [format_rational(v) for v in point.coordinates(variables)]


def parse_assignments(text: str) -> dict[UserSubset, object]:
    """Reads "d_1=1,d_23=1/2" (or "d_1,10=1") into a subset -> rational mapping."""
    return {UserSubset.from_label(label): parse_rational(value) for label, value in split_pairs(text)}


def parse_vector(text: str, variables) -> dict[UserSubset, object]:
    """Either labelled assignments or comma-separated rationals in variable order."""
    if "=" in text:
        return parse_assignments(text)
    values = [parse_rational(v) for v in text.split(",")]
    if len(values) != len(variables):
        raise DimensionError(f"expected {len(variables)} values ({', '.join(s.label for s in variables)}), got {len(values)}")
    return dict(zip(variables, values))


def json_response(document, status: int = 200) -> Response:
    return Response(to_json(document), status=status, mimetype="application/json")


def error_response(message: str, status: int) -> Response:
    return json_response({"error": message, "success": False}, status)


def status_for(error: Exception) -> int:
    if isinstance(error, UnknownSchemeError):
        return 404
    if isinstance(error, (EmptyRegionError, InfeasiblePrecoderError)):
        return 422
    if isinstance(error, (ParameterError, DimensionError, SchemeSyntaxError, CapabilityError, ValidationError)):
        return 400
    if isinstance(error, DofLabError):
        return 422
    return 500


def json_errors(f):
    """
    Turns exceptions raised by an API view into the JSON error envelope.
    Domain errors keep their message; anything else is logged and reported as 500.
    """

    @wraps(f)
    def decorated_function(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ValidationError as e:
            return error_response(f"invalid request: {e.errors(include_url=False)}", 400)
        except DofLabError as e:
            return error_response(str(e), status_for(e))
        except ZeroDivisionError as e:
            return error_response(str(e), 400)
        except Exception:
            current_app.logger.exception("unhandled error in %s", f.__name__)
            return error_response("internal error", 500)

    return decorated_function


def no_cache(f):
    """Decorator to disable caching on responses."""

    @wraps(f)
    def decorated_function(*args, **kwargs):
        response = make_response(f(*args, **kwargs))
        response.headers["Cache-Control"] = "no-cache, no-store, must-revalidate"
        response.headers["Pragma"] = "no-cache"
        response.headers["Expires"] = "0"
        return response

    return decorated_function
