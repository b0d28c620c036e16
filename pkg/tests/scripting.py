"""Helpers for scripting mock chat transcripts in tests."""

from __future__ import annotations

import json

from foodkg.backends import MockChatBackend, prompt_key
from foodkg.enrich import PromptPack, corrective_prompt


class TranscriptBuilder:
    """Accumulates prompt-hash -> response entries for a MockChatBackend."""

    def __init__(self, prompts: PromptPack) -> None:
        self.prompts = prompts
        self.entries: dict[str, str] = {}

    def add(self, task: str, user: str, response: str | dict | list) -> None:
        if not isinstance(response, str):
            response = json.dumps(response)
        system = self.prompts.system_prompt(task)
        self.entries[prompt_key(system, user)] = response

    def add_retry(
        self, task: str, original_user: str, reason: str, response: str | dict
    ) -> None:
        """Script the follow-up prompt sent after an invalid reply."""
        self.add(task, corrective_prompt(original_user, reason), response)

    def backend(self) -> MockChatBackend:
        return MockChatBackend(self.entries)
