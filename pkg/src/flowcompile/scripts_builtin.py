"""Built-in deterministic script profiles for dry runs.

Each profile is a pure function of the incoming request, so a pipeline wired
entirely to scripted providers produces byte-identical artifacts run to run.
Reply text deliberately contains no node ids and no placeholder syntax.
"""

from __future__ import annotations

import hashlib

from .llmgate import ChatRequest

END_MARKER = "<END_OF_CONVERSATION>"

_AGENT_LINES = (
    "Thanks for sharing that. Could you tell me a little more about what you need?",
    "Got it. Let me note those details and we can move on to the next step.",
    "Here are a couple of options that fit what you described so far.",
    "Understood. I have updated everything on my end accordingly.",
    "Great, we are almost done. Let me put the final pieces together.",
)

_USER_LINES = (
    "Sure, that works for me.",
    "Hmm, let me think. I would prefer the second one you mentioned.",
    "Yes, that is exactly what I had in mind.",
    "Okay, sounds good so far. What happens next?",
    "Thanks, that covers everything I wanted to ask about.",
)

_CRITERIA = (
    "TaskSuccess",
    "InformationAccuracy",
    "Consistency",
    "GracefulHandling",
    "Naturalness",
)


def _digest(request: ChatRequest) -> int:
    h = hashlib.sha256()
    for m in request.messages:
        h.update(m.role.encode())
        h.update(b"\x00")
        h.update(m.content.encode())
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "big")


def dialogue_script(request: ChatRequest, call_index: int) -> str:
    """Generic conversational reply, varied by prompt content. Follows the
    per-turn speaker named in the generation prompt when present."""
    system = request.messages[0].content
    if "Speaker for this turn: the customer" in system:
        lines = _USER_LINES
    elif "Speaker for this turn: the agent" in system:
        lines = _AGENT_LINES
    else:
        lines = _AGENT_LINES if request.tag.startswith(("agent", "gen")) else _USER_LINES
    return lines[_digest(request) % len(lines)]


def make_agent_script(close_after_turns: int = 4):
    """Agent that converses, then appends the end marker once it has spoken
    `close_after_turns` times (counted from assistant messages in history)."""

    def script(request: ChatRequest, call_index: int) -> str:
        spoken = sum(1 for m in request.messages if m.role == "assistant")
        line = _AGENT_LINES[_digest(request) % len(_AGENT_LINES)]
        if spoken >= close_after_turns:
            return line + " " + END_MARKER
        return line

    return script


def user_script(request: ChatRequest, call_index: int) -> str:
    return _USER_LINES[_digest(request) % len(_USER_LINES)]


def router_script(request: ChatRequest, call_index: int) -> str:
    """Pick a valid option deterministically from the listed candidates."""
    import re

    m = re.search(r"between 1 and (\d+)", request.messages[-1].content)
    options = int(m.group(1)) if m else 1
    return str(1 + _digest(request) % options)


def judge_script(request: ChatRequest, call_index: int) -> str:
    """Well-formed scorecard block with content-derived scores."""
    d = _digest(request)
    lines = []
    for i, name in enumerate(_CRITERIA):
        score = 3 + ((d >> (4 * i)) % 3)  # 3..5
        lines.append(f"{name}: {score}")
    lines.append(f"Challenges: {'yes' if d % 2 == 0 else 'no'}")
    lines.append("Rationale: The agent progressed through the task and kept details straight.")
    return "\n".join(lines)


_PROFILES = {
    "dialogue": dialogue_script,
    "user": user_script,
    "router": router_script,
    "judge": judge_script,
}


def builtin_script(profile: str):
    if profile.startswith("agent-close-"):
        return make_agent_script(int(profile.rsplit("-", 1)[1]))
    if profile == "agent":
        return make_agent_script()
    if profile in _PROFILES:
        return _PROFILES[profile]
    raise ValueError(f"unknown script profile {profile!r}")
