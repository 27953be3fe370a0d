"""Advisory core: state machine, prompt assembly, context, chat backends.

A session is ARMED (idle, watching for triggers), ACTIVE (showing a
generated advisory), or INTERACTIVE (free-text conversation).  Events come
from cockpit buttons or master warning/caution edges; the transition table
is total, and pairs it does not list are explicit no-ops.

Prompts are assembled from fixed, ordered sections; the conversation
context is budgeted by a cheap character-based token estimate.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import httpx

from .airports import AlternateCandidate
from .retrieval import ScoredChunk
from .telemetry import EcamMessage, EcamSeverity, FlightState, TriggerEvent

log = logging.getLogger(__name__)

DEFAULT_TOKEN_BUDGET = 6000

DEFAULT_SYSTEM_PROMPT = (
    "You are an onboard flight operations assistant. Provide concise responses: "
    "short sentences, no filler, most important item first. The pilot in command "
    "retains full authority; you advise, you never act. When you use a manual "
    "excerpt, cite it by its doc_id. If information is missing, say so rather "
    "than guessing."
)

SECTION_FLIGHT = "FLIGHT DATA"
SECTION_ECAM = "ECAM"
SECTION_EXCERPTS = "MANUAL EXCERPTS"
SECTION_ALTERNATES = "ALTERNATE AIRPORTS"
SECTION_QUERY = "PILOT QUERY"
SECTION_ORDER = (SECTION_FLIGHT, SECTION_ECAM, SECTION_EXCERPTS, SECTION_ALTERNATES, SECTION_QUERY)

FUEL_IMBALANCE_THRESHOLD = 0.1


class AdvisorError(Exception):
    """Base class for advisory errors."""


class TurnTooLarge(AdvisorError):
    pass


class BudgetExceeded(AdvisorError):
    pass


class BackendUnavailable(AdvisorError):
    """Chat backend unreachable after retries."""

    def __init__(self, attempts: int, reason: str):
        self.attempts = attempts
        super().__init__(f"backend unavailable after {attempts} attempts: {reason}")


class BackendRejected(AdvisorError):
    """Chat backend refused the request; retrying will not help."""

    def __init__(self, status: int, reason: str):
        self.status = status
        super().__init__(f"backend rejected request ({status}): {reason}")


class AdvisoryState(enum.Enum):
    ARMED = "ARMED"
    ACTIVE = "ACTIVE"
    INTERACTIVE = "INTERACTIVE"


class UiEventKind(enum.Enum):
    QUERY_BUTTON = "QUERY_BUTTON"
    ARM_BUTTON = "ARM_BUTTON"
    SUBMIT_TEXT = "SUBMIT_TEXT"
    MASTER_ALERT = "MASTER_ALERT"


class Action(enum.Enum):
    NONE = "NONE"
    GENERATE_ADVISORY = "GENERATE_ADVISORY"
    GENERATE_REPLY = "GENERATE_REPLY"
    CLEAR_CONTEXT = "CLEAR_CONTEXT"


class Role(enum.Enum):
    SYSTEM = "system"
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class UiEvent:
    """A cockpit input: button press, text submission, or master alert edge."""

    kind: UiEventKind
    text: str | None = None
    alert: TriggerEvent | None = None

    def __post_init__(self):
        if self.kind is UiEventKind.SUBMIT_TEXT:
            if not self.text:
                raise ValueError("SUBMIT_TEXT requires non-empty text")
        elif self.text is not None:
            raise ValueError(f"{self.kind.value} must not carry text")
        if self.kind is UiEventKind.MASTER_ALERT:
            if self.alert is None:
                raise ValueError("MASTER_ALERT requires the trigger event")
        elif self.alert is not None:
            raise ValueError(f"{self.kind.value} must not carry an alert")


@dataclass(frozen=True)
class AdvisoryResponse:
    text: str
    created_at: int
    source_state: AdvisoryState


def transition(
    state: AdvisoryState,
    event: UiEvent,
    interactive_sticky: bool = True,
    alert_preempts: bool = False,
) -> tuple[AdvisoryState, Action]:
    """Total transition function over (state, event kind).

    Pairs not covered below keep the state and do nothing.
    `interactive_sticky` keeps INTERACTIVE across submits instead of
    dropping back to ARMED; `alert_preempts` lets a master alert force a
    fresh advisory even while ACTIVE or INTERACTIVE.
    """
    kind = event.kind
    if kind is UiEventKind.QUERY_BUTTON:
        return AdvisoryState.ACTIVE, Action.GENERATE_ADVISORY
    if kind is UiEventKind.SUBMIT_TEXT:
        if state is AdvisoryState.INTERACTIVE and not interactive_sticky:
            return AdvisoryState.ARMED, Action.GENERATE_REPLY
        return AdvisoryState.INTERACTIVE, Action.GENERATE_REPLY
    if kind is UiEventKind.MASTER_ALERT:
        if state is AdvisoryState.ARMED or alert_preempts:
            return AdvisoryState.ACTIVE, Action.GENERATE_ADVISORY
        log.info("master alert ignored while %s", state.value)
        return state, Action.NONE
    # ARM_BUTTON: only defined from ACTIVE.
    if state is AdvisoryState.ACTIVE:
        return AdvisoryState.ARMED, Action.CLEAR_CONTEXT
    return state, Action.NONE


def estimate_tokens(text: str) -> int:
    """Tokenizer-independent estimate: ceil(chars / 4)."""
    return (len(text) + 3) // 4


@dataclass
class ConversationContext:
    """Ordered conversation turns under a token budget; turn 0 is SYSTEM."""

    system_text: str
    token_budget: int = DEFAULT_TOKEN_BUDGET
    turns: list[tuple[Role, str]] = field(default_factory=list)

    def __post_init__(self):
        if estimate_tokens(self.system_text) > self.token_budget:
            raise TurnTooLarge("system turn alone exceeds the token budget")
        if not self.turns or self.turns[0][0] is not Role.SYSTEM:
            self.turns = [(Role.SYSTEM, self.system_text)] + list(self.turns)

    def estimated_tokens(self) -> int:
        return sum(estimate_tokens(content) for _, content in self.turns)

    def reset(self) -> None:
        """Drop everything but the SYSTEM turn."""
        del self.turns[1:]

    def rendered(self) -> list[dict[str, str]]:
        return [{"role": role.value, "content": content} for role, content in self.turns]


def manage_context(context: ConversationContext, new_turn: tuple[Role, str]) -> ConversationContext:
    """Append a turn, evicting oldest non-SYSTEM turns until within budget.

    The SYSTEM turn and the turn being appended are never evicted; if the
    budget cannot be met even then, the turn is rejected.
    """
    role, content = new_turn
    if role is Role.SYSTEM:
        raise ValueError("the SYSTEM turn is fixed at construction")
    if estimate_tokens(content) > context.token_budget:
        raise TurnTooLarge(
            f"turn of ~{estimate_tokens(content)} tokens exceeds budget {context.token_budget}"
        )
    context.turns.append((role, content))
    while context.estimated_tokens() > context.token_budget:
        if len(context.turns) <= 2:
            # Only SYSTEM plus the new turn remain.
            context.turns.pop()
            raise TurnTooLarge("turn does not fit alongside the system prompt")
        context.turns.pop(1)
    return context


def format_flight_data(state: FlightState) -> str:
    """Render the fixed line-per-field flight data block."""
    return "\n".join(
        [
            f"POSITION: {state.latitude_deg:.4f}, {state.longitude_deg:.4f}",
            f"ALTITUDE: {round(state.altitude_ft)} ft",
            f"IAS: {round(state.indicated_airspeed_kt)} kt",
            f"HDG: {round(state.heading_deg)}",
            f"V/S: {round(state.vertical_speed_fpm)} fpm",
            f"FUEL L/R: {round(state.fuel_left_kg)}/{round(state.fuel_right_kg)} kg",
            f"AP: {state.autopilot_mode}",
            f"A/THR: {state.autothrottle_mode}",
        ]
    )


def fuel_imbalance_note(state: FlightState) -> str | None:
    total = state.fuel_left_kg + state.fuel_right_kg
    if abs(state.fuel_left_kg - state.fuel_right_kg) / max(total, 1.0) > FUEL_IMBALANCE_THRESHOLD:
        return (
            f"fuel imbalance: left {round(state.fuel_left_kg)} kg, "
            f"right {round(state.fuel_right_kg)} kg"
        )
    return None


_SEVERITY_ORDER = (EcamSeverity.WARNING, EcamSeverity.CAUTION, EcamSeverity.MEMO)


def _ecam_sorted(ecam: Sequence[EcamMessage]) -> list[EcamMessage]:
    return [m for severity in _SEVERITY_ORDER for m in ecam if m.severity is severity]


def build_retrieval_query(
    flight: FlightState, ecam: Sequence[EcamMessage], user_text: str | None = None
) -> str:
    """Retrieval query from ECAM texts, flight anomalies, and pilot text."""
    parts = [m.text for m in _ecam_sorted(ecam)]
    note = fuel_imbalance_note(flight)
    if note:
        parts.append(note)
    if user_text:
        parts.append(user_text)
    return "; ".join(parts) if parts else "general flight status"


@dataclass(frozen=True)
class PromptBundle:
    """The five prompt sections, in render order."""

    system_text: str
    flight_block: str
    ecam_block: str
    retrieved_block: tuple[str, ...]
    alternates_block: str
    user_text: str | None = None


def format_ecam_block(ecam: Sequence[EcamMessage]) -> str:
    return "\n".join(f"{m.severity.value}: {m.text}" for m in _ecam_sorted(ecam))


def format_excerpt(result: ScoredChunk) -> str:
    return f"[{result.chunk.doc_id}#{result.chunk.chunk_index}] {result.chunk.text}"


def format_alternates_block(alternates: Sequence[AlternateCandidate]) -> str:
    lines = []
    for c in alternates:
        line = (
            f"{c.airport.ident} {c.airport.name}: {c.distance_nm:.1f} nm, "
            f"bearing {round(c.bearing_deg)}, longest runway {c.longest_runway_ft} ft"
        )
        if c.metar is not None:
            line += f", METAR: {c.metar.raw}"
        lines.append(line)
    return "\n".join(lines)


def _render_user_block(bundle: PromptBundle) -> str:
    sections = [
        (SECTION_FLIGHT, bundle.flight_block),
        (SECTION_ECAM, bundle.ecam_block),
        (SECTION_EXCERPTS, "\n".join(bundle.retrieved_block)),
        (SECTION_ALTERNATES, bundle.alternates_block),
        (SECTION_QUERY, bundle.user_text or ""),
    ]
    blocks = [f"=== {name} ===\n{body}" for name, body in sections if body]
    return "\n\n".join(blocks)


def assemble_prompt(
    flight: FlightState,
    ecam: Sequence[EcamMessage],
    retrieved: Sequence[ScoredChunk],
    alternates: Sequence[AlternateCandidate],
    context: ConversationContext,
    user_text: str | None = None,
) -> tuple[PromptBundle, list[dict[str, str]]]:
    """Build the bundle and the full rendered message list for the backend.

    Empty sections are omitted, headers included.  When the render would
    exceed the context budget, excerpts are dropped lowest score first;
    after that, oldest prior turns are left out of the render (same order
    the context itself evicts).  Only a render of system prompt plus user
    block alone that still does not fit is rejected.
    """
    kept = list(retrieved)
    skip_turns = 0
    history = context.rendered()
    while True:
        bundle = PromptBundle(
            system_text=context.system_text,
            flight_block=format_flight_data(flight),
            ecam_block=format_ecam_block(ecam),
            retrieved_block=tuple(format_excerpt(r) for r in kept),
            alternates_block=format_alternates_block(alternates),
            user_text=user_text,
        )
        user_block = _render_user_block(bundle)
        rendered = (
            history[:1]
            + history[1 + skip_turns:]
            + [{"role": Role.USER.value, "content": user_block}]
        )
        total = sum(estimate_tokens(m["content"]) for m in rendered)
        if total <= context.token_budget:
            return bundle, rendered
        if kept:
            drop = min(range(len(kept)), key=lambda idx: (kept[idx].score, -idx))
            kept.pop(drop)
        elif skip_turns < len(history) - 1:
            skip_turns += 1
        else:
            raise BudgetExceeded(
                f"prompt needs ~{total} tokens with nothing left to drop; "
                f"budget {context.token_budget}"
            )


class ChatClient(Protocol):
    backend_id: str

    def complete(self, messages: list[dict[str, str]]) -> str:
        """Assistant text for a rendered message list."""


class MockChatClient:
    """Offline backend: deterministic reply naming the sections it saw."""

    backend_id = "mock"

    def __init__(self):
        self.calls: list[list[dict[str, str]]] = []

    def complete(self, messages: list[dict[str, str]]) -> str:
        self.calls.append([dict(m) for m in messages])
        last_user = next((m["content"] for m in reversed(messages) if m["role"] == "user"), "")
        present = [name for name in SECTION_ORDER if f"=== {name} ===" in last_user]
        listed = ", ".join(present) if present else "none"
        return f"MOCK ADVISORY | sections: {listed}"


class RemoteChatClient:
    """Chat backend over the generic completions HTTP contract.

    POST {"model": ..., "messages": [...]}; reply text is read from
    choices[0].message.content.  Transport errors and 5xx retry with
    linear backoff; 4xx is surfaced immediately.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout_s: float = 60.0,
        max_attempts: int = 3,
        retry_backoff_s: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ):
        self.backend_id = f"remote:{model}"
        self.base_url = base_url
        self.model = model
        self._max_attempts = max_attempts
        self._backoff_s = retry_backoff_s
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout_s, headers=headers, transport=transport)

    def complete(self, messages: list[dict[str, str]]) -> str:
        body = {"model": self.model, "messages": list(messages)}
        last_error: Exception | None = None
        for attempt in range(1, self._max_attempts + 1):
            try:
                response = self._client.post(self.base_url, json=body)
            except httpx.TransportError as exc:
                last_error = exc
                log.warning("chat attempt %d/%d failed: %s", attempt, self._max_attempts, exc)
            else:
                if response.status_code >= 500:
                    last_error = AdvisorError(f"server error {response.status_code}")
                    log.warning(
                        "chat attempt %d/%d got status %d",
                        attempt, self._max_attempts, response.status_code,
                    )
                elif response.status_code >= 400:
                    raise BackendRejected(response.status_code, response.text[:200])
                else:
                    try:
                        text = response.json()["choices"][0]["message"]["content"]
                    except (KeyError, IndexError, TypeError, ValueError) as exc:
                        raise BackendRejected(response.status_code, f"malformed response: {exc}") from None
                    if not isinstance(text, str) or not text:
                        raise BackendRejected(response.status_code, "empty completion")
                    return text
            if attempt < self._max_attempts:
                time.sleep(self._backoff_s * attempt)
        raise BackendUnavailable(self._max_attempts, str(last_error))


def generate(
    context: ConversationContext,
    rendered: list[dict[str, str]],
    client: ChatClient,
    source_state: AdvisoryState,
) -> AdvisoryResponse:
    """Run the backend and, on success, record the exchange in the context."""
    reply = client.complete(rendered)
    if not reply:
        raise BackendRejected(200, "backend returned empty text")
    user_content = rendered[-1]["content"]
    manage_context(context, (Role.USER, user_content))
    manage_context(context, (Role.ASSISTANT, reply))
    return AdvisoryResponse(text=reply, created_at=int(time.time() * 1000), source_state=source_state)


@dataclass
class AdvisorSettings:
    interactive_sticky: bool = True
    alert_preempts: bool = False
    token_budget: int = DEFAULT_TOKEN_BUDGET
    system_prompt: str = DEFAULT_SYSTEM_PROMPT


class AdvisorySession:
    """Single-writer session: state, flags, and the conversation context."""

    def __init__(self, settings: AdvisorSettings | None = None):
        self.settings = settings or AdvisorSettings()
        self.state = AdvisoryState.ARMED
        self.context = ConversationContext(
            system_text=self.settings.system_prompt, token_budget=self.settings.token_budget
        )

    def apply_event(self, event: UiEvent) -> tuple[AdvisoryState, Action]:
        """Advance the state machine; CLEAR_CONTEXT also resets the context."""
        new_state, action = transition(
            self.state, event,
            interactive_sticky=self.settings.interactive_sticky,
            alert_preempts=self.settings.alert_preempts,
        )
        if new_state is not self.state:
            log.info("advisory state %s -> %s on %s", self.state.value, new_state.value, event.kind.value)
        self.state = new_state
        if action is Action.CLEAR_CONTEXT:
            self.context.reset()
        return new_state, action
