"""Plan files: a TOML dialect holding a designed law and its certificates.

The on-disk field set is fixed: top-level ``n, D, eta, beta_mode`` (plus
``rho`` in gaussian mode), one ``[[laws]]`` table per coordinate with
``index, kind`` and the law parameters, and one ``[[certification]]`` table
per designed step with ``d, delta_mean, delta_stderr, trials, seed,
verdict``.  Floats are written with ``repr`` so a load-save cycle is
byte-identical.
"""

from __future__ import annotations

from typing import Union

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .designer import Arrow, CurvePlan, StepCertification
from .laws import Gaussian, ProductLaw, law_from_fields, law_to_fields
from .risk import PairedDelta

__all__ = ["PlanParseError", "plan_to_text", "save_plan", "load_plan", "parse_plan_text"]


class PlanParseError(ValueError):
    """A plan file failed to parse or validate; the message points at why."""


def _fmt(value: Union[int, float, str]) -> str:
    if isinstance(value, bool):
        raise TypeError("no boolean fields in plan files")
    if isinstance(value, int):
        return str(int(value))
    if isinstance(value, float):
        text = repr(float(value))  # plain-float repr round-trips exactly
        # TOML floats need a decimal point or exponent
        if "." not in text and "e" not in text and "n" not in text and "i" not in text:
            text += ".0"
        return text
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def plan_to_text(plan: CurvePlan) -> str:
    lines = [
        "# riskcurve plan",
        f"n = {plan.n}",
        f"D = {plan.D}",
        f"eta = {_fmt(float(plan.eta))}",
        f'beta_mode = "{plan.beta_mode}"',
    ]
    if plan.beta_mode == "gaussian":
        lines.append(f"rho = {_fmt(float(plan.rho))}")
    for j, law in enumerate(plan.laws.laws, start=1):
        lines.append("")
        lines.append("[[laws]]")
        lines.append(f"index = {j}")
        for key, value in law_to_fields(law).items():
            lines.append(f"{key} = {_fmt(value)}")
    for cert in plan.certifications:
        lines.append("")
        lines.append("[[certification]]")
        lines.append(f"d = {cert.d_from}")
        lines.append(f"delta_mean = {_fmt(float(cert.delta.delta_mean))}")
        lines.append(f"delta_stderr = {_fmt(float(cert.delta.delta_stderr))}")
        lines.append(f"trials = {cert.delta.trials}")
        lines.append(f"seed = {cert.delta.seed}")
        lines.append(f'verdict = "{cert.verdict}"')
    return "\n".join(lines) + "\n"


def save_plan(plan: CurvePlan, path, header_lines=()) -> None:
    """Write a plan; ``header_lines`` are prepended as comments (provenance)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in header_lines:
            fh.write(line if line.startswith("#") else "# " + line)
            fh.write("\n")
        fh.write(plan_to_text(plan))


def parse_plan_text(text: str) -> CurvePlan:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise PlanParseError(f"plan file does not parse: {exc}") from exc
    try:
        n = int(data["n"])
        big_d = int(data["D"])
        eta = float(data["eta"])
        beta_mode = str(data["beta_mode"])
        rho = float(data["rho"]) if "rho" in data else None
        law_entries = data.get("laws", [])
        laws_by_index = {}
        for entry in law_entries:
            laws_by_index[int(entry["index"])] = law_from_fields(entry)
        if sorted(laws_by_index) != list(range(1, big_d + 1)):
            raise PlanParseError(
                f"law indices must cover 1..{big_d} exactly, got {sorted(laws_by_index)}"
            )
        laws = ProductLaw(tuple(laws_by_index[j] for j in range(1, big_d + 1)))
        certs = []
        for entry in data.get("certification", []):
            d = int(entry["d"])
            if not 1 <= d < big_d:
                raise PlanParseError(f"certification step d={d} outside 1..{big_d - 1}")
            law = laws.laws[d]  # the law appended by step d -> d+1
            arrow = Arrow.DOWN if isinstance(law, Gaussian) else Arrow.UP
            delta = PairedDelta(
                delta_mean=float(entry["delta_mean"]),
                delta_stderr=float(entry["delta_stderr"]),
                trials=int(entry["trials"]),
                seed=int(entry["seed"]),
                d_from=d,
            )
            verdict = str(entry["verdict"])
            if verdict not in ("certified", "inconclusive"):
                raise PlanParseError(f"unknown verdict {verdict!r} at step d={d}")
            certs.append(StepCertification(d, arrow, law, delta, verdict))
        return CurvePlan(
            n=n,
            D=big_d,
            eta=eta,
            beta_mode=beta_mode,
            laws=laws,
            rho=rho,
            certifications=tuple(certs),
        )
    except PlanParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise PlanParseError(f"plan file is malformed: {exc}") from exc


def load_plan(path) -> CurvePlan:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_plan_text(fh.read())
