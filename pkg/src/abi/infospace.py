"""Shared information space with an authoritative drop lifecycle.

Content units ("drops") fall slowly from a virtual cloud, expire at the
ground, and can be grabbed, moved, pinned, thrown away, expanded, or
selectively shared.  Private drops are visible only to their owner and to
users they were explicitly shared with.  A single authoritative session
owns the space; every applied command is journaled so the final state can
be rebuilt by replay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

DEFAULT_CLOUD_HEIGHT = 2.2
DEFAULT_FALL_SPEED = 0.05
GROUND_HEIGHT = 0.0

# Spawn placement constraints: keep sight lines between users clear and put
# new drops into peripheral vision.
MIN_SIGHTLINE_CLEARANCE = 0.5
MIN_GAZE_OFFSET_DEG = 25.0
SPAWN_RADIUS = 2.5
MAX_SPAWN_ATTEMPTS = 1000

PUBLIC = "public"
PRIVATE = "private"

FALLING = "falling"
HELD = "held"
PINNED = "pinned"
EXPANDED = "expanded"
DISCARDED = "discarded"
EXPIRED = "expired"

_TERMINAL = {DISCARDED, EXPIRED}

GESTURE_KINDS = ("grab", "move", "release", "throw", "show", "close", "share")


class SpaceError(Exception):
    pass


class PermissionDenied(SpaceError):
    pass


class NotVisible(SpaceError):
    pass


class InvalidState(SpaceError):
    pass


class PlacementFailure(SpaceError):
    pass


@dataclass(frozen=True)
class Gesture:
    kind: str
    drop_id: str
    position: tuple[float, float, float] | None = None  # move
    to: str | None = None  # share target: user id or "public"

    def __post_init__(self):
        if self.kind not in GESTURE_KINDS:
            raise ValueError(f"unknown gesture kind {self.kind!r}")


@dataclass
class Drop:
    drop_id: str
    content_ref: str
    owner: str | None
    visibility: str  # "public" | "private"
    position: tuple[float, float, float]
    state: str = FALLING
    fall_speed: float = DEFAULT_FALL_SPEED
    held_by: str | None = None
    expanded_from_pinned: bool = False
    shared_with: frozenset[str] = frozenset()
    spawned_at: float = 0.0


@dataclass
class UserPose:
    head: tuple[float, float, float]
    gaze: tuple[float, float, float]


def _point_segment_distance_2d(p, a, b) -> float:
    px, py = p[0], p[1]
    ax, ay = a[0], a[1]
    bx, by = b[0], b[1]
    dx, dy = bx - ax, by - ay
    length_sq = dx * dx + dy * dy
    if length_sq == 0.0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / length_sq))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _gaze_offset_deg(head, gaze, point) -> float:
    """Horizontal angle between the gaze direction and the bearing to point."""
    gx, gy = gaze[0], gaze[1]
    vx, vy = point[0] - head[0], point[1] - head[1]
    gn = math.hypot(gx, gy)
    vn = math.hypot(vx, vy)
    if gn == 0.0 or vn == 0.0:
        return 180.0
    cos = max(-1.0, min(1.0, (gx * vx + gy * vy) / (gn * vn)))
    return math.degrees(math.acos(cos))


@dataclass
class Space:
    """Authoritative world state; mutate only through the op methods."""

    cloud_height: float = DEFAULT_CLOUD_HEIGHT
    fall_speed: float = DEFAULT_FALL_SPEED
    ground_height: float = GROUND_HEIGHT
    drops: dict[str, Drop] = field(default_factory=dict)
    users: dict[str, UserPose] = field(default_factory=dict)
    clock: float = 0.0
    journal: list[dict] = field(default_factory=list, compare=False)
    _next_id: int = 0

    # -- user management ---------------------------------------------------

    def register_user(
        self,
        user: str,
        head: tuple[float, float, float] = (0.0, 0.0, 1.7),
        gaze: tuple[float, float, float] = (0.0, 1.0, 0.0),
    ) -> None:
        self.users[user] = UserPose(tuple(head), tuple(gaze))
        self.journal.append(
            {"op": "register_user", "user": user, "head": tuple(head), "gaze": tuple(gaze)}
        )

    def update_pose(self, user: str, head, gaze) -> None:
        if user not in self.users:
            raise SpaceError(f"unknown user {user!r}")
        self.users[user] = UserPose(tuple(head), tuple(gaze))
        self.journal.append(
            {"op": "pose", "user": user, "head": tuple(head), "gaze": tuple(gaze)}
        )

    # -- visibility ----------------------------------------------------------

    def visible_to(self, user: str, drop: Drop) -> bool:
        if drop.visibility == PUBLIC:
            return True
        return user == drop.owner or user in drop.shared_with

    def snapshot_for(self, user: str) -> list[dict]:
        """Drops visible to the user, each with its visibility tag."""
        out = []
        for drop_id in sorted(self.drops):
            drop = self.drops[drop_id]
            if drop.state in _TERMINAL:
                continue
            if not self.visible_to(user, drop):
                continue
            out.append(
                {
                    "id": drop.drop_id,
                    "content": drop.content_ref,
                    "vis": drop.visibility,
                    "pos": list(drop.position),
                    "state": drop.state,
                }
            )
        return out

    # -- operations ----------------------------------------------------------

    def spawn(
        self,
        content_ref: str,
        owner: str | None,
        visibility: str,
        seed: int,
    ) -> tuple[str, list[dict]]:
        """Spawn a falling drop at a placement satisfying the constraints.

        Rejection-samples positions at cloud height around the users until
        every head-to-head sight line keeps its clearance and the point sits
        outside every user's central gaze cone.
        """
        if not self.users:
            raise InvalidState("cannot spawn into a space with no users")
        if visibility not in (PUBLIC, PRIVATE):
            raise ValueError(f"unknown visibility {visibility!r}")
        if visibility == PRIVATE and owner is None:
            raise ValueError("private drops need an owner")
        position = self._sample_spawn_position(seed)
        return self._spawn_at(content_ref, owner, visibility, position)

    def _sample_spawn_position(self, seed: int) -> tuple[float, float, float]:
        rng = np.random.default_rng(seed)
        heads = [pose.head for pose in self.users.values()]
        cx = sum(h[0] for h in heads) / len(heads)
        cy = sum(h[1] for h in heads) / len(heads)
        pairs = [
            (a, b) for i, a in enumerate(heads) for b in heads[i + 1 :]
        ]
        for _ in range(MAX_SPAWN_ATTEMPTS):
            radius = SPAWN_RADIUS * math.sqrt(rng.uniform())
            angle = rng.uniform(0.0, 2.0 * math.pi)
            point = (cx + radius * math.cos(angle), cy + radius * math.sin(angle), self.cloud_height)
            if any(
                _point_segment_distance_2d(point, a, b) < MIN_SIGHTLINE_CLEARANCE
                for a, b in pairs
            ):
                continue
            if any(
                _gaze_offset_deg(pose.head, pose.gaze, point) < MIN_GAZE_OFFSET_DEG
                for pose in self.users.values()
            ):
                continue
            return point
        raise PlacementFailure(
            f"no spawn position satisfied the constraints in {MAX_SPAWN_ATTEMPTS} attempts"
        )

    def _spawn_at(
        self,
        content_ref: str,
        owner: str | None,
        visibility: str,
        position: tuple[float, float, float],
        drop_id: str | None = None,
    ) -> tuple[str, list[dict]]:
        if drop_id is None:
            drop_id = f"d{self._next_id}"
        self._next_id += 1
        drop = Drop(
            drop_id=drop_id,
            content_ref=content_ref,
            owner=owner,
            visibility=visibility,
            position=position,
            state=FALLING,
            fall_speed=self.fall_speed,
            spawned_at=self.clock,
        )
        self.drops[drop_id] = drop
        self.journal.append(
            {
                "op": "spawn",
                "id": drop_id,
                "content": content_ref,
                "owner": owner,
                "vis": visibility,
                "pos": tuple(position),
            }
        )
        events = [{"event": "spawned", "id": drop_id, "vis": visibility, "pos": list(position)}]
        return drop_id, events

    def tick(self, dt: float) -> list[dict]:
        """Advance time: falling drops descend and expire at the ground."""
        if dt < 0.0:
            raise ValueError("dt must be >= 0")
        events: list[dict] = []
        self.clock += dt
        for drop_id in sorted(self.drops):
            drop = self.drops[drop_id]
            if drop.state != FALLING:
                continue
            x, y, z = drop.position
            z_new = z - drop.fall_speed * dt
            if z_new <= self.ground_height:
                drop.position = (x, y, self.ground_height)
                drop.state = EXPIRED
                events.append({"event": "expired", "id": drop_id})
            else:
                drop.position = (x, y, z_new)
        self.journal.append({"op": "tick", "dt": dt})
        return events

    def apply_gesture(self, actor: str, gesture: Gesture) -> list[dict]:
        """Validate and apply one gesture; on error the space is unchanged."""
        if actor not in self.users:
            raise SpaceError(f"unknown user {actor!r}")
        drop = self.drops.get(gesture.drop_id)
        if drop is None:
            raise SpaceError(f"unknown drop {gesture.drop_id!r}")
        if drop.state in _TERMINAL:
            raise InvalidState(f"drop {drop.drop_id} is {drop.state}")
        if not self.visible_to(actor, drop):
            raise NotVisible(f"drop {drop.drop_id} is not visible to {actor}")

        kind = gesture.kind
        events: list[dict] = []
        if kind == "grab":
            if drop.state == HELD:
                raise PermissionDenied(f"drop {drop.drop_id} is held by {drop.held_by}")
            if drop.state not in (FALLING, PINNED):
                raise InvalidState(f"cannot grab a drop in state {drop.state}")
            drop.state = HELD
            drop.held_by = actor
            events.append({"event": "grabbed", "id": drop.drop_id, "by": actor})
        elif kind == "move":
            self._require_holder(actor, drop)
            if gesture.position is None:
                raise ValueError("move needs a position")
            drop.position = tuple(gesture.position)
            events.append(
                {"event": "moved", "id": drop.drop_id, "pos": list(drop.position)}
            )
        elif kind == "release":
            self._require_holder(actor, drop)
            drop.state = PINNED
            drop.held_by = None
            events.append(
                {"event": "pinned", "id": drop.drop_id, "pos": list(drop.position)}
            )
        elif kind == "throw":
            self._require_holder(actor, drop)
            drop.state = DISCARDED
            drop.held_by = None
            events.append({"event": "discarded", "id": drop.drop_id})
        elif kind == "show":
            if drop.state == HELD:
                self._require_holder(actor, drop)
                drop.expanded_from_pinned = False
            elif drop.state == PINNED:
                drop.expanded_from_pinned = True
                drop.held_by = actor
            else:
                raise InvalidState(f"cannot expand a drop in state {drop.state}")
            drop.state = EXPANDED
            events.append({"event": "expanded", "id": drop.drop_id, "by": actor})
        elif kind == "close":
            if drop.state != EXPANDED:
                raise InvalidState(f"cannot close a drop in state {drop.state}")
            self._require_holder(actor, drop)
            if drop.expanded_from_pinned:
                drop.state = PINNED
                drop.held_by = None
            else:
                drop.state = HELD
            events.append({"event": "closed", "id": drop.drop_id})
        elif kind == "share":
            if drop.visibility != PRIVATE:
                raise InvalidState("only private drops can be shared")
            if actor != drop.owner:
                raise PermissionDenied("only the owner may share a private drop")
            if gesture.to is None:
                raise ValueError("share needs a recipient")
            if gesture.to == PUBLIC:
                drop.visibility = PUBLIC
                drop.shared_with = frozenset()
            else:
                if gesture.to not in self.users:
                    raise SpaceError(f"unknown user {gesture.to!r}")
                drop.shared_with = drop.shared_with | {gesture.to}
            events.append(
                {"event": "shared", "id": drop.drop_id, "to": gesture.to}
            )
        self.journal.append(
            {
                "op": "gesture",
                "actor": actor,
                "kind": kind,
                "id": gesture.drop_id,
                "pos": tuple(gesture.position) if gesture.position is not None else None,
                "to": gesture.to,
            }
        )
        return events

    def _require_holder(self, actor: str, drop: Drop) -> None:
        if drop.state not in (HELD, EXPANDED):
            raise InvalidState(f"drop {drop.drop_id} is not held (state {drop.state})")
        if drop.held_by != actor:
            raise PermissionDenied(
                f"drop {drop.drop_id} is held by {drop.held_by}, not {actor}"
            )


def replay(journal: Iterable[dict], **space_kwargs) -> Space:
    """Rebuild a space by re-applying a journal to a fresh instance."""
    space = Space(**space_kwargs)
    for entry in journal:
        op = entry["op"]
        if op == "register_user":
            space.register_user(entry["user"], entry["head"], entry["gaze"])
        elif op == "pose":
            space.update_pose(entry["user"], entry["head"], entry["gaze"])
        elif op == "spawn":
            space._spawn_at(
                entry["content"],
                entry["owner"],
                entry["vis"],
                tuple(entry["pos"]),
                drop_id=entry["id"],
            )
        elif op == "tick":
            space.tick(entry["dt"])
        elif op == "gesture":
            space.apply_gesture(
                entry["actor"],
                Gesture(
                    kind=entry["kind"],
                    drop_id=entry["id"],
                    position=entry["pos"],
                    to=entry["to"],
                ),
            )
        else:
            raise SpaceError(f"unknown journal op {op!r}")
    return space
