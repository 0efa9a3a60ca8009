"""Uniform chat-completion interface for every prompting role.

Each role binds a default prompt template and a JSON response schema.
``Backend.complete`` renders the template, sends it, validates the reply,
and runs at most ``repair_rounds`` repair round-trips before giving up.

Three backends are provided: an OpenAI-compatible HTTP client, a scripted
backend that replays recorded responses keyed by (role, prompt digest) for
fully offline deterministic runs, and a recording wrapper that captures any
backend's traffic into a scripted fixture.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from string import Template
from typing import Any, Callable, Mapping

from .errors import (
    BackendTimeoutError,
    FixtureError,
    FixtureGapError,
    InvalidInputError,
    SchemaValidationError,
    TransportError,
)

FIXTURE_SCHEMA_VERSION = "1"


class PromptRole(str, Enum):
    """The prompting roles the engine and curator rely on."""

    GENERATE = "generate"
    SPAN = "span"
    QUERY = "query"
    VERIFY_LEAF = "verify_leaf"
    CONSOLIDATE = "consolidate"
    DECONTEXT = "decontext"
    CURATE_EXTRACT = "curate_extract"
    CURATE_FALSIFY = "curate_falsify"
    CURATE_PARAPHRASE = "curate_paraphrase"
    CURATE_ALTERNATIVE = "curate_alternative"


ROLE_TEMPLATES: dict[PromptRole, str] = {
    PromptRole.GENERATE: "extract-atomic-v1",
    PromptRole.SPAN: "span-v1",
    PromptRole.QUERY: "query-v1",
    PromptRole.VERIFY_LEAF: "verify-leaf-v1",
    PromptRole.CONSOLIDATE: "consolidate-v1",
    PromptRole.DECONTEXT: "decontext-rewrite-v1",
    PromptRole.CURATE_EXTRACT: "curate-extract-v1",
    PromptRole.CURATE_FALSIFY: "curate-falsify-v1",
    PromptRole.CURATE_PARAPHRASE: "curate-paraphrase-v1",
    PromptRole.CURATE_ALTERNATIVE: "curate-alternative-v1",
}

_DECISIONS = ("accept", "reject", "unsubstantiated")


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise SchemaValidationError(message)


def _validate_claim_array(data: Any) -> list[dict]:
    _require(isinstance(data, list), "expected a JSON array of claim objects")
    out = []
    for i, item in enumerate(data):
        _require(isinstance(item, dict), f"claim {i} is not an object")
        text = item.get("text")
        _require(isinstance(text, str) and text.strip() != "", f"claim {i} has empty text")
        start, end = item.get("span_start"), item.get("span_end")
        _require(
            isinstance(start, int) and not isinstance(start, bool) and start >= 0,
            f"claim {i} span_start must be a non-negative integer",
        )
        _require(
            isinstance(end, int) and not isinstance(end, bool) and end > start,
            f"claim {i} span_end must be an integer greater than span_start",
        )
        contained = item.get("self_contained", True)
        _require(isinstance(contained, bool), f"claim {i} self_contained must be boolean")
        out.append(
            {
                "text": text.strip(),
                "span_start": start,
                "span_end": end,
                "self_contained": contained,
            }
        )
    return out


def _validate_subclaims(data: Any) -> list[str]:
    _require(isinstance(data, list), "expected a JSON array of sub-claim strings")
    out = []
    for i, item in enumerate(data):
        _require(
            isinstance(item, str) and item.strip() != "",
            f"sub-claim {i} must be a non-empty string",
        )
        out.append(item.strip())
    return out


def _validate_query(data: Any) -> dict:
    _require(isinstance(data, dict), "expected a JSON object")
    tool_id, query = data.get("tool_id"), data.get("query")
    _require(isinstance(tool_id, str) and tool_id.strip() != "", "tool_id must be non-empty")
    _require(isinstance(query, str) and query.strip() != "", "query must be non-empty")
    return {"tool_id": tool_id.strip(), "query": query.strip()}


def _validate_verify_leaf(data: Any) -> dict:
    _require(isinstance(data, dict), "expected a JSON object")
    decision = data.get("decision")
    _require(decision in _DECISIONS, f"decision must be one of {_DECISIONS}")
    reason = data.get("reason")
    _require(isinstance(reason, str) and reason.strip() != "", "reason must be non-empty")
    ids = data.get("evidence_ids", [])
    _require(
        isinstance(ids, list) and all(isinstance(x, str) for x in ids),
        "evidence_ids must be a list of strings",
    )
    return {"decision": decision, "reason": reason.strip(), "evidence_ids": list(ids)}


def _validate_consolidate(data: Any) -> dict:
    _require(isinstance(data, dict), "expected a JSON object")
    decision, score = data.get("decision"), data.get("score")
    _require(
        (decision is None) != (score is None),
        "exactly one of decision or score must be present",
    )
    if decision is not None:
        _require(decision in _DECISIONS, f"decision must be one of {_DECISIONS}")
    else:
        _require(
            isinstance(score, int) and not isinstance(score, bool) and 1 <= score <= 10,
            "score must be an integer from 1 to 10",
        )
    reason = data.get("reason")
    _require(isinstance(reason, str) and reason.strip() != "", "reason must be non-empty")
    ids = data.get("essential_child_ids", [])
    _require(
        isinstance(ids, list) and all(isinstance(x, str) for x in ids),
        "essential_child_ids must be a list of strings",
    )
    return {
        "decision": decision,
        "score": score,
        "reason": reason.strip(),
        "essential_child_ids": list(ids),
    }


def _validate_text(data: Any) -> dict:
    _require(isinstance(data, dict), "expected a JSON object")
    text = data.get("text")
    _require(isinstance(text, str) and text.strip() != "", "text must be non-empty")
    return {"text": text.strip()}


ROLE_SCHEMAS: dict[PromptRole, Callable[[Any], Any]] = {
    PromptRole.GENERATE: _validate_claim_array,
    PromptRole.SPAN: _validate_subclaims,
    PromptRole.QUERY: _validate_query,
    PromptRole.VERIFY_LEAF: _validate_verify_leaf,
    PromptRole.CONSOLIDATE: _validate_consolidate,
    PromptRole.DECONTEXT: _validate_text,
    PromptRole.CURATE_EXTRACT: _validate_claim_array,
    PromptRole.CURATE_FALSIFY: _validate_text,
    PromptRole.CURATE_PARAPHRASE: _validate_text,
    PromptRole.CURATE_ALTERNATIVE: _validate_text,
}


def load_template(template_id: str) -> str:
    """Read a prompt template bundled with the package."""
    ref = resources.files("claimtree").joinpath(f"templates/{template_id}.txt")
    try:
        return ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise InvalidInputError(f"unknown prompt template {template_id!r}") from None


def render_prompt(template_id: str, variables: Mapping[str, str]) -> str:
    """Substitute variables into a template; all variables must be supplied."""
    template = Template(load_template(template_id))
    try:
        return template.substitute(variables)
    except KeyError as err:
        raise InvalidInputError(
            f"template {template_id!r} is missing variable {err.args[0]!r}"
        ) from None


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def _repair_prompt(prompt: str, raw: str, error: str) -> str:
    return (
        f"{prompt}\n\n"
        f"Your previous reply was not valid for the required JSON schema "
        f"({error}). Reply again with only the corrected JSON.\n"
        f"Previous reply:\n{raw}"
    )


@dataclass
class BackendConfig:
    """Connection settings for an HTTP chat-completion backend."""

    endpoint: str = ""
    model: str = ""
    api_key_env: str | None = None
    max_retries: int = 2
    timeout: float = 30.0
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise InvalidInputError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise InvalidInputError("timeout must be > 0")


class Backend:
    """Template rendering, schema validation, and repair logic shared by all backends."""

    def complete(
        self,
        role: PromptRole,
        variables: Mapping[str, str],
        *,
        template_id: str | None = None,
        repair_rounds: int = 1,
    ) -> Any:
        """Render, send, and validate one prompt for a role.

        Raises InvalidInputError before any send if a template variable is
        missing, and SchemaValidationError once ``repair_rounds`` repair
        round-trips have failed to produce schema-valid output.
        """
        tid = template_id or ROLE_TEMPLATES[role]
        prompt = render_prompt(tid, variables)
        validator = ROLE_SCHEMAS[role]
        raw = self._send(role, prompt)
        for round_no in range(repair_rounds + 1):
            try:
                return validator(json.loads(raw))
            except (json.JSONDecodeError, SchemaValidationError) as err:
                if round_no == repair_rounds:
                    raise SchemaValidationError(
                        f"{role.value} reply invalid after {repair_rounds} repair "
                        f"round(s): {err}"
                    ) from err
                raw = self._send(role, _repair_prompt(prompt, raw, str(err)))

    def _send(self, role: PromptRole, prompt: str) -> str:
        raise NotImplementedError


class HttpBackend(Backend):
    """OpenAI-compatible chat-completion client.

    The API key is read from the environment variable named in the config at
    call time and never stored. A custom ``transport`` callable with the
    signature ``(url, payload, headers, timeout) -> str`` may be injected for
    testing; the default uses ``requests``.
    """

    def __init__(self, config: BackendConfig, transport: Callable | None = None):
        if not config.endpoint or not config.model:
            raise InvalidInputError("HTTP backend requires endpoint and model")
        self.config = config
        self._transport = transport or self._requests_transport

    @staticmethod
    def _requests_transport(url: str, payload: dict, headers: dict, timeout: float) -> str:
        import requests

        try:
            response = requests.post(url, json=payload, headers=headers, timeout=timeout)
        except requests.Timeout as err:
            raise BackendTimeoutError(f"backend timed out after {timeout}s") from err
        except requests.RequestException as err:
            raise TransportError(f"backend request failed: {err}") from err
        if response.status_code != 200:
            raise TransportError(
                f"backend returned HTTP {response.status_code}: {response.text[:500]}"
            )
        body = response.json()
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as err:
            raise TransportError(f"malformed completion payload: {err}") from err

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            key = os.environ.get(self.config.api_key_env)
            if not key:
                raise TransportError(
                    f"environment variable {self.config.api_key_env!r} is not set"
                )
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _send(self, role: PromptRole, prompt: str) -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "response_format": {"type": "json_object"},
        }
        last_error: Exception | None = None
        for _ in range(self.config.max_retries + 1):
            try:
                return self._transport(
                    self.config.endpoint, payload, self._headers(), self.config.timeout
                )
            except TransportError as err:
                last_error = err
        raise TransportError(
            f"backend unreachable after {self.config.max_retries + 1} attempt(s): {last_error}"
        )


def _canonical_response(response: Any) -> str:
    if isinstance(response, str):
        return response
    return json.dumps(response, sort_keys=True, ensure_ascii=False)


class ScriptedBackend(Backend):
    """Deterministic replay of recorded responses, keyed by (role, prompt digest).

    Unknown prompts fail loudly with the digest so the missing fixture entry
    can be located. With this backend the whole engine is a pure function of
    its inputs.
    """

    def __init__(self, entries: Mapping[tuple[str, str], str]):
        self._entries = dict(entries)

    @classmethod
    def from_entries(cls, entries: list[dict]) -> "ScriptedBackend":
        table: dict[tuple[str, str], str] = {}
        for i, entry in enumerate(entries):
            try:
                key = (entry["role"], entry["digest"])
                response = _canonical_response(entry["response"])
            except (KeyError, TypeError) as err:
                raise FixtureError(f"fixture entry {i} is malformed: {err}") from err
            if key in table:
                raise FixtureError(
                    f"fixture entry {i} collides with an earlier entry for "
                    f"role={key[0]} digest={key[1]}"
                )
            table[key] = response
        return cls(table)

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            raise FixtureError(f"cannot read fixture {path}: {err}") from err
        if not isinstance(data, dict) or "entries" not in data:
            raise FixtureError(f"fixture {path} must be an object with an 'entries' list")
        return cls.from_entries(data["entries"])

    def _send(self, role: PromptRole, prompt: str) -> str:
        digest = prompt_digest(prompt)
        try:
            return self._entries[(role.value, digest)]
        except KeyError:
            raise FixtureGapError(
                f"no scripted entry for role={role.value} digest={digest}"
            ) from None


def scripted_backend(fixture_path: str | Path) -> ScriptedBackend:
    """Load a scripted backend from a fixture file."""
    return ScriptedBackend.from_file(fixture_path)


class RecordingBackend(Backend):
    """Wrap another backend and capture its raw traffic as fixture entries."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.entries: dict[tuple[str, str], str] = {}

    def _send(self, role: PromptRole, prompt: str) -> str:
        raw = self.inner._send(role, prompt)
        self.entries[(role.value, prompt_digest(prompt))] = raw
        return raw

    def fixture_dict(self) -> dict:
        entries = [
            {"role": role, "digest": digest, "response": response}
            for (role, digest), response in sorted(self.entries.items())
        ]
        return {"schema_version": FIXTURE_SCHEMA_VERSION, "entries": entries}

    def save_fixture(self, path: str | Path) -> None:
        text = json.dumps(self.fixture_dict(), sort_keys=True, indent=2, ensure_ascii=False)
        Path(path).write_text(text + "\n", encoding="utf-8")


def scripted_entry(
    role: PromptRole,
    variables: Mapping[str, str],
    response: Any,
    *,
    template_id: str | None = None,
) -> dict:
    """Build one fixture entry by rendering the prompt a caller would send.

    Convenience for authoring fixtures in code instead of computing digests
    by hand.
    """
    prompt = render_prompt(template_id or ROLE_TEMPLATES[role], variables)
    return {
        "role": role.value,
        "digest": prompt_digest(prompt),
        "response": _canonical_response(response),
    }
