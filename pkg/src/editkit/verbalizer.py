"""Instruction template banks and seeded rendering of single and composite instructions.

Banks live in plain-text files (one template per line, ``#`` comments
ignored, file name = task kind) so the template sets stay editable data
rather than code. A loaded bank is read-only; all sampling draws from a
caller-supplied random source, so this module holds no mutable state.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

from .core import CompositeTask, EditTask


class UnknownTaskError(KeyError):
    """Raised when a bank has no templates for the requested task."""


class CompositeArityError(ValueError):
    """Raised when a composite does not have exactly 2 or 3 tasks."""


@dataclass(frozen=True)
class TemplateBank:
    entries: dict[EditTask, tuple[str, ...]]

    def templates(self, task: EditTask) -> tuple[str, ...]:
        """Full template list for a task, paraphrase variants included."""
        templates = self.entries.get(EditTask(task))
        if not templates:
            raise UnknownTaskError(f"no instruction templates for task {task!r}")
        return templates

    def tasks(self) -> tuple[EditTask, ...]:
        return tuple(self.entries)

    def is_member(self, task: EditTask, instruction: str) -> bool:
        return instruction in self.entries.get(EditTask(task), ())


def _parse_bank_text(text: str) -> tuple[str, ...]:
    lines = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            lines.append(line)
    return tuple(lines)


def load_bank_dir(path: str | Path) -> TemplateBank:
    """Load every ``<task>.txt`` file in a directory into one bank."""
    entries: dict[EditTask, tuple[str, ...]] = {}
    for bank_file in sorted(Path(path).glob("*.txt")):
        task = EditTask(bank_file.stem)
        entries[task] = _parse_bank_text(bank_file.read_text(encoding="utf-8"))
    return TemplateBank(entries)


def default_bank() -> TemplateBank:
    """The bank shipped with the package."""
    entries: dict[EditTask, tuple[str, ...]] = {}
    bank_root = resources.files("editkit").joinpath("banks")
    for task in EditTask:
        entry = bank_root.joinpath(f"{task.value}.txt")
        entries[task] = _parse_bank_text(entry.read_text(encoding="utf-8"))
    return TemplateBank(entries)


def sample_instruction(bank: TemplateBank, task: EditTask, rng: random.Random) -> str:
    """Uniform draw from the task's template list. Deterministic given the rng state."""
    templates = bank.templates(task)
    return templates[rng.randrange(len(templates))]


def join_composite(templates: Sequence[str]) -> str:
    """Join per-task templates into one composite instruction string.

    Pieces are joined with ", " except for ", and " before the last; the
    first template is capitalized at the first character, later ones are
    lowercased at the first character, and the result ends with ":".
    """
    first = templates[0][0].upper() + templates[0][1:]
    pieces = [first] + [v[0].lower() + v[1:] for v in templates[1:]]
    return ", ".join(pieces[:-1]) + ", and " + pieces[-1] + ":"


def compose_composite_traced(
    bank: TemplateBank, tasks: CompositeTask, rng: random.Random
) -> tuple[str, tuple[EditTask, ...], tuple[str, ...]]:
    """compose_composite plus the shuffled task order and drawn templates."""
    if len(tasks.tasks) not in (2, 3):
        raise CompositeArityError(f"composite needs 2 or 3 tasks, got {len(tasks.tasks)}")
    order = list(tasks.tasks)
    rng.shuffle(order)
    drawn = [sample_instruction(bank, task, rng) for task in order]
    return join_composite(drawn), tuple(order), tuple(drawn)


def compose_composite(bank: TemplateBank, tasks: CompositeTask, rng: random.Random) -> str:
    """Render a composite instruction: shuffle task order uniformly, draw one
    template per task, and join them (see join_composite)."""
    return compose_composite_traced(bank, tasks, rng)[0]


def paraphrase_variants(bank: TemplateBank, task: EditTask) -> list[str]:
    """All templates for a task; the bank itself encodes the paraphrase variants."""
    return list(bank.templates(task))
