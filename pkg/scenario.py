"""
Text formats: the expression grammar for F and psi, scenario files, and the
JSON report.

Expression grammar (recursive descent, '^' binds tightest):

    expr     = ['-'] term *[ ('+' | '-') term ]
    term     = factor *[ '*' factor ]
    factor   = base [ '^' NAT ]
    base     = RATIONAL | NAME | 'exp' '(' expr ')' | '(' expr ')'
    RATIONAL = INT [ '/' POSINT ]

NAME is any coordinate name (x, y, z1, yt, zt1, xs, ...). Inside exp(...)
the argument must reduce to an integer multiple of y; a number may be
written directly before y there ("exp(2y)").
"""
import json
import logging
import math
import re
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, NamedTuple, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from errors import ExpressionSemanticError, ExpressionSyntaxError, ScenarioError
from exprs import Y, Coordinate, Expr, Point
from geometry import family_F, model_family_F

logger = logging.getLogger(__name__)

MAX_EXPONENT = 64
MAX_DEPTH = 100
MAX_DIGITS = 200
MAX_TERMS = 20000

_DIGITS = "0123456789"
_OPERATORS = "+-*/^()"


# ----------------------------------------------------------------------
# Expressions
# ----------------------------------------------------------------------
class Token(NamedTuple):
    kind: str  # "num", "name", "op" or "end"
    text: str
    line: int
    column: int


def _tokenize(text: str) -> List[Token]:
    tokens: List[Token] = []
    i, line, column = 0, 1, 1
    while i < len(text):
        c = text[i]
        if c == "\n":
            i, line, column = i + 1, line + 1, 1
            continue
        if c in " \t\r":
            i, column = i + 1, column + 1
            continue
        start = i
        if c in _DIGITS:
            while i < len(text) and text[i] in _DIGITS:
                i += 1
            if i - start > MAX_DIGITS:
                raise ExpressionSyntaxError("number is too long", line, column)
            kind = "num"
        elif "a" <= c <= "z":
            while i < len(text) and "a" <= text[i] <= "z":
                i += 1
            while i < len(text) and text[i] in _DIGITS:
                i += 1
            kind = "name"
        elif c in _OPERATORS:
            i += 1
            kind = "op"
        else:
            raise ExpressionSyntaxError(f"unexpected character {c!r}", line, column)
        tokens.append(Token(kind, text[start:i], line, column))
        column += i - start
    tokens.append(Token("end", "", line, column))
    return tokens


class _Parser:
    def __init__(self, text: str, p: Optional[int]):
        self.tokens = _tokenize(text)
        self.position = 0
        self.p = p
        self.depth = 0
        self.exp_depth = 0

    def peek(self) -> Token:
        return self.tokens[self.position]

    def advance(self) -> Token:
        token = self.tokens[self.position]
        if token.kind != "end":
            self.position += 1
        return token

    def is_op(self, text: str) -> bool:
        token = self.peek()
        return token.kind == "op" and token.text == text

    def error(self, message: str, token: Optional[Token] = None) -> ExpressionSyntaxError:
        token = token or self.peek()
        found = "end of input" if token.kind == "end" else repr(token.text)
        return ExpressionSyntaxError(f"{message}, found {found}", token.line, token.column)

    def expect(self, text: str) -> Token:
        if not self.is_op(text):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def parse(self) -> Expr:
        value = self.expr()
        if self.peek().kind != "end":
            raise self.error("unexpected token")
        return value

    def expr(self) -> Expr:
        negate = self.is_op("-")
        if negate:
            self.advance()
        value = self.term()
        if negate:
            value = -value
        while self.is_op("+") or self.is_op("-"):
            op = self.advance().text
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self) -> Expr:
        value = self.factor()
        while True:
            if self.is_op("*"):
                self.advance()
            elif not (self.exp_depth and self.peek().kind == "name"):
                return value
            value = value * self.factor()

    def factor(self) -> Expr:
        base = self.base()
        if not self.is_op("^"):
            return base
        caret = self.advance()
        token = self.peek()
        if token.kind != "num":
            raise self.error("expected a natural exponent after '^'")
        self.advance()
        n = int(token.text)
        if n > MAX_EXPONENT:
            raise ExpressionSemanticError(f"exponent {n} exceeds {MAX_EXPONENT}", token.line, token.column)
        terms = len(base.terms())
        if n > 1 and terms > 1 and math.comb(terms + n - 1, n) > MAX_TERMS:
            raise ExpressionSemanticError("power expands to too many terms", caret.line, caret.column)
        return base ** n

    def base(self) -> Expr:
        token = self.peek()
        if token.kind == "num":
            self.advance()
            value = Fraction(int(token.text))
            if self.is_op("/"):
                self.advance()
                denominator = self.peek()
                if denominator.kind != "num":
                    raise self.error("expected a denominator after '/'")
                self.advance()
                if int(denominator.text) == 0:
                    raise ExpressionSyntaxError("denominator must be positive", denominator.line, denominator.column)
                value = value / int(denominator.text)
            return Expr.constant(value)
        if token.kind == "name":
            if token.text == "exp":
                return self.exponential()
            self.advance()
            try:
                coord = Coordinate.parse(token.text)
            except ValueError:
                raise ExpressionSyntaxError(f"unknown name {token.text!r}", token.line, token.column) from None
            if self.p is not None and not coord.valid_for(self.p):
                raise ExpressionSemanticError(f"{coord.name} is not a coordinate for p={self.p}",
                                              token.line, token.column)
            return Expr.var(coord)
        if self.is_op("("):
            self.enter(token)
            self.advance()
            inner = self.expr()
            self.expect(")")
            self.depth -= 1
            return inner
        raise self.error("expected a number, a name or '('")

    def enter(self, token: Token) -> None:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExpressionSyntaxError("expression is nested too deeply", token.line, token.column)

    def exponential(self) -> Expr:
        start = self.advance()
        self.enter(start)
        self.expect("(")
        self.exp_depth += 1
        argument = self.expr()
        self.exp_depth -= 1
        self.expect(")")
        self.depth -= 1
        terms = argument.terms()
        if not terms:
            return Expr.constant(1)
        multiple = terms.get((((Y, 1),), 0))
        if len(terms) != 1 or multiple is None or multiple.denominator != 1:
            raise ExpressionSemanticError("exp argument must be an integer multiple of y", start.line, start.column)
        return Expr.exp(int(multiple))


def parse_expression(text: str, p: Optional[int] = None) -> Expr:
    """
    Parse ``text`` into a canonical Expr.

    Args:
        text: Expression source.
        p: When given, z-type coordinates must have index <= p.

    Raises:
        ExpressionSyntaxError: with the line and column of the problem;
            ExpressionSemanticError for well-formed text outside the class.
    """
    return _Parser(text, p).parse()


def format_expression(e: Expr) -> str:
    return e.to_text()


# ----------------------------------------------------------------------
# Scenario files
# ----------------------------------------------------------------------
TASK_NAMES = (
    "curvature", "weyl", "symmetric", "model", "normalize", "stabdim", "isometry-dims",
    "alpha", "classify-psi", "orbit-map", "orbit-sweep", "okp", "jacobi",
)


class Family(str, Enum):
    MK = "Mk"
    NPSI = "Npsi"
    F = "F"


class TaskSpec(BaseModel):
    index: int
    name: str
    params: Dict[str, str] = Field(default_factory=dict)

    @field_validator("name")
    @classmethod
    def known_task(cls, value: str) -> str:
        if value not in TASK_NAMES:
            raise ValueError(f"unknown task {value!r}; expected one of {', '.join(TASK_NAMES)}")
        return value


class ScenarioConfig(BaseModel):
    name: str = "scenario"
    p: int = Field(..., ge=1, description="The manifold has dimension 6+4p.")
    family: Optional[Family] = Field(default=None, description="Mk, Npsi or F; table-only tasks need none.")
    k: Optional[int] = Field(default=None, description="Order for the Mk family, 0..p+2.")
    psi: Optional[str] = Field(default=None, description="Profile text for the Npsi family.")
    F: Optional[str] = Field(default=None, description="Warping function text for the F family.")
    point: Dict[str, str] = Field(default_factory=dict, description="Coordinate name -> rational text.")
    tasks: List[TaskSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_ranges(self) -> "ScenarioConfig":
        if self.family is Family.MK:
            if self.k is None:
                raise ValueError("family Mk needs k")
            if not 0 <= self.k <= self.p + 2:
                raise ValueError(f"k must lie in [0, {self.p + 2}] for p={self.p}, got {self.k}")
        if self.family is Family.NPSI and not self.psi:
            raise ValueError("family Npsi needs psi")
        if self.family is Family.F and not self.F:
            raise ValueError("family F needs F")
        for name, value in self.point.items():
            coord = Coordinate.parse(name)
            if not coord.valid_for(self.p):
                raise ValueError(f"point coordinate {name} is not valid for p={self.p}")
            try:
                Fraction(value)
            except ZeroDivisionError:
                raise ValueError(f"point value {value!r} for {name} has a zero denominator") from None
        self.tasks.sort(key=lambda task: task.index)
        return self

    def profile(self) -> Expr:
        if self.psi is None:
            raise ScenarioError("this scenario has no psi")
        return parse_expression(self.psi, self.p)

    def metric_function(self) -> Expr:
        if self.family is None:
            raise ScenarioError("this scenario names no family")
        if self.family is Family.MK:
            return model_family_F(self.p, self.k)
        if self.family is Family.NPSI:
            return family_F(self.p, self.profile())
        return parse_expression(self.F, self.p)

    def evaluation_point(self) -> Point:
        return Point(self.p, {name: value for name, value in self.point.items()})


def make_config(**fields) -> ScenarioConfig:
    try:
        return ScenarioConfig(**fields)
    except ValidationError as e:
        messages = "; ".join(error["msg"] for error in e.errors())
        raise ScenarioError(f"invalid scenario: {messages}") from e


_TOP_KEYS = {"name", "p", "family", "k", "psi", "F"}


def parse_task(index: int, text: str) -> Dict[str, Any]:
    parts = text.split()
    if not parts:
        raise ScenarioError(f"task.{index} is empty")
    params = {}
    for piece in parts[1:]:
        if "=" not in piece:
            raise ScenarioError(f"task.{index}: parameter {piece!r} is not key=value")
        key, value = piece.split("=", 1)
        params[key] = value
    return {"index": index, "name": parts[0], "params": params}


def parse_scenario(text: str) -> ScenarioConfig:
    """
    Parse the line-based scenario format: ``key=value`` lines, ``#`` comments
    and ``[section]`` headers that prefix the keys below them.

    Raises:
        ScenarioError: for unknown, duplicate or missing keys and range errors.
    """
    values: Dict[str, str] = {}
    section: Optional[str] = None
    for number, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioError(f"line {number}: unterminated section header")
            section = line[1:-1].strip() or None
            continue
        if "=" not in line:
            raise ScenarioError(f"line {number}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if section:
            key = f"{section}.{key}"
        if key in values:
            raise ScenarioError(f"line {number}: duplicate key {key!r}")
        values[key] = value

    fields: Dict[str, Any] = {"point": {}, "tasks": []}
    for key, value in values.items():
        if key in _TOP_KEYS:
            fields[key] = value
        elif key.startswith("point.") and key.count(".") == 1:
            fields["point"][key[len("point."):]] = value
        elif key.startswith("task.") and key[len("task."):].isdigit():
            fields["tasks"].append(parse_task(int(key[len("task."):]), value))
        else:
            raise ScenarioError(f"unknown key {key!r}")
    for required in ("p", "family"):
        if required not in fields:
            raise ScenarioError(f"missing mandatory key {required!r}")
    try:
        fields["p"] = int(fields["p"])
        if "k" in fields:
            fields["k"] = int(fields["k"])
    except ValueError as e:
        raise ScenarioError(f"p and k must be integers: {e}") from e
    config = make_config(**fields)
    logger.info("Parsed scenario %r with %d tasks", config.name, len(config.tasks))
    return config


# ----------------------------------------------------------------------
# Reports
# ----------------------------------------------------------------------
STATUSES = ("ok", "fail", "no-map", "error")


class TaskResult(BaseModel):
    task: str
    status: str = "ok"
    values: Dict[str, Any] = Field(default_factory=dict)
    residuals: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("status")
    @classmethod
    def known_status(cls, value: str) -> str:
        if value not in STATUSES:
            raise ValueError(f"unknown status {value!r}")
        return value


class Report(BaseModel):
    scenario: str = "scenario"
    results: List[TaskResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(result.status == "ok" for result in self.results)


def _jsonable(value: Any) -> Any:
    """Plain JSON data: rationals as "num/den", non-finite floats as strings, dict keys sorted."""
    if isinstance(value, Enum):
        return _jsonable(value.value)
    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    if isinstance(value, float):
        return value if math.isfinite(value) else str(value)
    if isinstance(value, BaseModel):
        return _jsonable(value.model_dump())
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in sorted(value.items(), key=lambda item: str(item[0]))}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return str(value)


def _float_text(value: float) -> str:
    text = f"{value:.17g}"
    return text if any(c in text for c in ".en") else text + ".0"


class ReportEncoder(json.JSONEncoder):
    """json encoder that writes floats with 17 significant digits."""

    def iterencode(self, o: Any, _one_shot: bool = False):
        markers = {} if self.check_circular else None
        encoder = json.encoder.encode_basestring_ascii if self.ensure_ascii else json.encoder.encode_basestring
        return json.encoder._make_iterencode(markers, self.default, encoder, self.indent, _float_text,
                                             self.key_separator, self.item_separator, self.sort_keys,
                                             self.skipkeys, _one_shot)(o, 0)


def emit_report(report: Report) -> str:
    """Deterministic JSON; rationals as "num/den", floats with 17 significant digits."""
    payload = {
        "scenario": report.scenario,
        "results": [
            {"task": result.task, "status": result.status,
             "values": _jsonable(result.values), "residuals": _jsonable(result.residuals)}
            for result in report.results
        ],
    }
    return json.dumps(payload, cls=ReportEncoder) + "\n"


_RATIONAL_RE = re.compile(r"^-?\d+/\d+$")


def _decode(value: Any) -> Any:
    if isinstance(value, str):
        if _RATIONAL_RE.match(value):
            return Fraction(value)
        if value in ("inf", "-inf", "nan"):
            return float(value)
        return value
    if isinstance(value, list):
        return [_decode(v) for v in value]
    if isinstance(value, dict):
        return {k: _decode(v) for k, v in value.items()}
    return value


def parse_report(text: str) -> Report:
    try:
        payload = json.loads(text)
        return Report(
            scenario=payload.get("scenario", "scenario"),
            results=[TaskResult(task=r["task"], status=r["status"], values=_decode(r["values"]),
                                residuals=_decode(r["residuals"])) for r in payload["results"]],
        )
    except (ValueError, KeyError, TypeError, AttributeError) as e:
        raise ScenarioError(f"malformed report: {e}") from e
