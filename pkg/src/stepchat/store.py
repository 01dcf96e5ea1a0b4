"""Append-only session persistence: one JSONL log per session.

Every accepted turn is appended together with a post-turn state snapshot, so
a restarted service can rebuild an equivalent session (phase, cursor, history,
even a mid-conversation mutated task) from the log alone.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional

from .orchestrator import (
    Session,
    Turn,
    apply_state_dict,
    session_state_dict,
    turn_from_dict,
    turn_to_dict,
)


class SessionStore:
    def __init__(self, base_dir):
        self.base_dir = Path(base_dir)
        self.base_dir.mkdir(parents=True, exist_ok=True)

    def session_path(self, session_id: str) -> Path:
        return self.base_dir / f"{session_id}.jsonl"

    def _append(self, session_id: str, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False) + "\n"
        with open(self.session_path(session_id), "a", encoding="utf-8") as f:
            f.write(line)

    def append_created(self, session: Session) -> None:
        self._append(
            session.session_id,
            {"event": "created", "session_id": session.session_id},
        )

    def append_turn(self, session: Session, turn: Turn) -> None:
        self._append(
            session.session_id,
            {
                "event": "turn",
                "turn": turn_to_dict(turn),
                "state": session_state_dict(session),
            },
        )

    def exists(self, session_id: str) -> bool:
        return self.session_path(session_id).exists()

    def load_records(self, session_id: str) -> list[dict]:
        records = []
        with open(self.session_path(session_id), "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
        return records

    def restore(self, session_id: str) -> Optional[Session]:
        """Rebuild a session by replaying its log; None if never persisted."""
        if not self.exists(session_id):
            return None
        session = Session(session_id=session_id)
        last_state: Optional[dict] = None
        for record in self.load_records(session_id):
            if record.get("event") == "turn":
                session.history.append(turn_from_dict(record["turn"]))
                last_state = record.get("state")
        if last_state is not None:
            apply_state_dict(session, last_state)
        return session

    def list_sessions(self) -> list[str]:
        return sorted(p.stem for p in self.base_dir.glob("*.jsonl"))
