"""Tiny generator of single-supporting-fact stories in the bAbI text format.

Useful for smoke tests and demos when the real corpus is not available.  It
is *not* the bAbI corpus and numbers obtained on it say nothing about bAbI.
"""

from __future__ import annotations

import numpy as np

PEOPLE = ("Mary", "John", "Sandra", "Daniel")
PLACES = ("kitchen", "garden", "office", "hallway", "bathroom", "bedroom")
VERBS = ("moved to", "went to", "journeyed to", "travelled to", "went back to")


def where_is_stories(n_questions: int, seed: int = 0, facts_per_question: int = 2,
                     questions_per_story: int = 5) -> str:
    """Text with ``n_questions`` question lines, 'Where is X?' style."""
    rng = np.random.default_rng(seed)
    lines = []
    asked = 0
    while asked < n_questions:
        line_id = 1
        location = {}
        for _ in range(questions_per_story):
            if asked == n_questions:
                break
            for _ in range(facts_per_question):
                who = PEOPLE[rng.integers(len(PEOPLE))]
                where = PLACES[rng.integers(len(PLACES))]
                verb = VERBS[rng.integers(len(VERBS))]
                location[who] = (where, line_id)
                lines.append(f"{line_id} {who} {verb} the {where}.")
                line_id += 1
            who = sorted(location)[rng.integers(len(location))]
            where, support = location[who]
            lines.append(f"{line_id} Where is {who}? \t{where}\t{support}")
            line_id += 1
            asked += 1
    return "\n".join(lines) + "\n"


def write_task_dir(root, task_id=1, n_train=200, n_test=100, seed=0):
    """Write ``qa{task}_toy_{train,test}.txt`` under ``root/en`` and return ``root``."""
    from pathlib import Path

    en = Path(root) / "en"
    en.mkdir(parents=True, exist_ok=True)
    (en / f"qa{task_id}_toy_train.txt").write_text(where_is_stories(n_train, seed), encoding="utf-8")
    (en / f"qa{task_id}_toy_test.txt").write_text(where_is_stories(n_test, seed + 1), encoding="utf-8")
    return Path(root)
