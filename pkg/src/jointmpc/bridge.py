"""Websocket bridge between the live controller and browser clients.

Message schema (JSON text frames, every message carries v:1):

  server→client on connect:
    {v, type:"hello", k, control_period, chain:{...}, world:{...}, goal}
  server→client stream:
    {v, type:"state", t, q, ee, goal, links, top_rollouts, costs, latency_ms}
  server→client on bad input:
    {v, type:"error", message}
  client→server:
    {v?, type:"set_goal", position:[x,y(,z)]}
    {v?, type:"pause"} | {v?, type:"resume"} | {v?, type:"reset"}

The control loop owns all mutable state and runs regardless of clients.
Snapshots are serialized once per broadcast tick and fanned out identically
to every connected client; a client that stops draining its queue gets cut
instead of back-pressuring the loop. Goal updates land in a single-slot
inbox read once per control cycle.
"""

from __future__ import annotations

import asyncio
import json
import logging
import os
from contextlib import asynccontextmanager
from pathlib import Path

import numpy as np

from .controller import Controller
from .kinematics import fk_batch
from .rollout import zero_state
from .simworld import TargetScript, sim_step, target_at

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
QUEUE_SIZE = 32


def _round(values, ndigits=5):
    return [round(float(v), ndigits) for v in values]


class Bridge:
    """Shared state between the control loop, the broadcaster, and the
    websocket endpoints."""

    def __init__(self, cfg, snapshot_hz: float = 30.0, k: int = 5):
        from .harness import build_controller, build_goal_source, initial_state

        self.cfg = cfg
        self.snapshot_hz = snapshot_hz
        self.k = k
        self.controller: Controller = build_controller(cfg)
        self.goal_source = build_goal_source(cfg)
        self.x0 = initial_state(cfg, self.controller.chain)
        self.state = self.x0
        self.t = 0.0
        self.paused = False
        self.running = True
        self._inbox_goal: np.ndarray | None = None
        self._reset_requested = False
        self._clients: set[asyncio.Queue] = set()
        self._latest: str | None = None
        self._latest_obj: dict | None = None

    # client side ---------------------------------------------------------

    def register(self) -> asyncio.Queue:
        q = asyncio.Queue(maxsize=QUEUE_SIZE)
        self._clients.add(q)
        return q

    def unregister(self, q: asyncio.Queue):
        self._clients.discard(q)

    def handle_client(self, text: str) -> str | None:
        """Apply one client message; returns an error frame on bad input."""
        try:
            msg = json.loads(text)
        except json.JSONDecodeError:
            return self._error("message is not valid JSON")
        if not isinstance(msg, dict) or "type" not in msg:
            return self._error("message must be an object with a 'type' field")
        kind = msg["type"]
        if kind == "set_goal":
            pos = msg.get("position")
            if (
                not isinstance(pos, (list, tuple))
                or len(pos) not in (2, 3)
                or not all(isinstance(v, (int, float)) and np.isfinite(v) for v in pos)
            ):
                return self._error("set_goal needs position:[x,y] or [x,y,z]")
            target = np.zeros(3)
            target[: len(pos)] = pos
            self._inbox_goal = target
            return None
        if kind == "pause":
            self.paused = True
            return None
        if kind == "resume":
            self.paused = False
            return None
        if kind == "reset":
            self._reset_requested = True
            return None
        return self._error(f"unknown message type {kind!r}")

    @staticmethod
    def _error(message: str) -> str:
        return json.dumps({"v": SCHEMA_VERSION, "type": "error", "message": message})

    def hello_text(self) -> str:
        chain = self.controller.chain
        world = self.controller.cost_stack.world
        capsules = [
            {
                "link": int(chain.cap_link[i]),
                "p0": _round(chain.cap_p0[i]),
                "p1": _round(chain.cap_p1[i]),
                "radius": round(float(chain.cap_r[i]), 5),
            }
            for i in range(chain.cap_r.shape[0])
        ]
        world_msg = {"spheres": [], "boxes": [], "bounds_min": None, "bounds_max": None}
        if world is not None:
            world_msg = {
                "spheres": [_round(row) for row in world.spheres],
                "boxes": [_round(row) for row in world.boxes],
                "bounds_min": _round(world.bounds_min),
                "bounds_max": _round(world.bounds_max),
            }
        return json.dumps(
            {
                "v": SCHEMA_VERSION,
                "type": "hello",
                "k": self.k,
                "control_period": self.controller.control_period,
                "chain": {
                    "name": chain.name,
                    "dof": chain.dof,
                    "task_dim": chain.task_dim,
                    "capsules": capsules,
                },
                "world": world_msg,
                "goal": _round(self._current_goal().target_pose.translation),
            }
        )

    # control side --------------------------------------------------------

    def _current_goal(self):
        if isinstance(self.goal_source, TargetScript):
            return target_at(self.goal_source, self.t)
        return self.goal_source

    def _apply_inbox(self):
        if self._inbox_goal is not None:
            from .costs import goal_at_position

            goal = goal_at_position(self._inbox_goal, mode=self.cfg.target.mode)
            self.goal_source = goal  # interactive goal replaces the script
            self._inbox_goal = None
        if self._reset_requested:
            from .harness import build_controller, build_goal_source

            self.controller = build_controller(self.cfg)
            self.goal_source = build_goal_source(self.cfg)
            self.state = self.x0
            self.t = 0.0
            self._reset_requested = False

    def _step_once(self):
        """One synchronous control + plant step; runs in a worker thread."""
        ctrl = self.controller
        goal = self._current_goal()
        ctrl.set_goal(goal)
        command, diag = ctrl.control_step(self.state)
        snapshot = self._snapshot(goal, diag)
        self.state = sim_step(self.state, command, ctrl.control_period)
        self.t += ctrl.control_period
        return snapshot

    def _snapshot(self, goal, diag) -> dict:
        ctrl = self.controller
        chain = ctrl.chain
        total, terms = ctrl.instantaneous_costs(self.state)
        _, trans = fk_batch(chain, self.state.theta[None, :])
        coords = 2 if chain.task_dim == 2 else 3
        links = [[0.0] * coords] + [_round(p[:coords]) for p in trans[0]]

        top = []
        if diag.bundle is not None:
            order = np.argsort(diag.bundle.total_per_particle)[: self.k]
            q_paths = diag.bundle.positions[order]  # (k, H, d)
            k, horizon, dof = q_paths.shape
            _, path_trans = fk_batch(chain, q_paths.reshape(-1, dof))
            ee_paths = path_trans[:, -1, :coords].reshape(k, horizon, coords)
            top = [[_round(p) for p in path] for path in ee_paths]

        return {
            "v": SCHEMA_VERSION,
            "type": "state",
            "t": round(self.t, 6),
            "q": _round(self.state.theta),
            "ee": _round(trans[0, -1, :coords]),
            "goal": _round(goal.target_pose.translation[:coords]),
            "links": links,
            "top_rollouts": top,
            "costs": {"total": round(total, 6), **{n: round(v, 6) for n, v in terms.items()}},
            "latency_ms": round(diag.latency_ms, 3),
            "paused": self.paused,
            "collision": bool(terms["envcoll"] > 0.0),
        }

    async def control_loop(self):
        period = self.controller.control_period
        while self.running:
            self._apply_inbox()
            if not self.paused:
                try:
                    snapshot = await asyncio.to_thread(self._step_once)
                    self._latest_obj = snapshot
                    self._latest = json.dumps(snapshot)
                except Exception:
                    log.exception("control step failed; pausing")
                    self.paused = True
            await asyncio.sleep(period)

    async def broadcast_loop(self):
        interval = 1.0 / self.snapshot_hz
        last_sent: str | None = None
        while self.running:
            text = self._latest
            if text is not None and text is not last_sent:
                for q in list(self._clients):
                    try:
                        q.put_nowait(text)
                    except asyncio.QueueFull:
                        log.warning("dropping slow client")
                        self.unregister(q)
                        while not q.empty():
                            q.get_nowait()
                        q.put_nowait(None)  # sentinel: sender closes the socket
                last_sent = text
            await asyncio.sleep(interval)


def make_app(cfg, snapshot_hz: float = 30.0, k: int = 5, ui_dir=None):
    from fastapi import FastAPI
    from fastapi.staticfiles import StaticFiles
    from starlette.routing import WebSocketRoute
    from starlette.websockets import WebSocketDisconnect

    bridge = Bridge(cfg, snapshot_hz=snapshot_hz, k=k)

    @asynccontextmanager
    async def lifespan(app):
        tasks = [
            asyncio.create_task(bridge.control_loop()),
            asyncio.create_task(bridge.broadcast_loop()),
        ]
        yield
        bridge.running = False
        for t in tasks:
            t.cancel()
        await asyncio.gather(*tasks, return_exceptions=True)

    app = FastAPI(lifespan=lifespan)
    app.state.bridge = bridge

    async def _sender(ws, q: asyncio.Queue):
        while True:
            text = await q.get()
            if text is None:
                await ws.close(code=1013)  # try again later: client too slow
                return
            await ws.send_text(text)

    # registered through starlette, not the fastapi decorator: the decorator
    # resolves parameter annotations by name in module globals, and the lazy
    # fastapi import keeps WebSocket out of that namespace
    async def ws_endpoint(ws):
        await ws.accept()
        await ws.send_text(bridge.hello_text())
        q = bridge.register()
        sender = asyncio.create_task(_sender(ws, q))
        try:
            while True:
                text = await ws.receive_text()
                reply = bridge.handle_client(text)
                if reply is not None:
                    try:
                        q.put_nowait(reply)
                    except asyncio.QueueFull:
                        pass  # client is being dropped anyway
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            bridge.unregister(q)

    app.router.routes.append(WebSocketRoute("/ws", ws_endpoint))

    if ui_dir is None:
        ui_dir = os.environ.get("JOINTMPC_UI_DIR", "")
    ui_path = Path(ui_dir) if ui_dir else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_path.is_dir():
        app.mount("/", StaticFiles(directory=ui_path, html=True), name="ui")
    return app


def serve(cfg, host: str = "127.0.0.1", port: int = 8765, snapshot_hz: float = 30.0):
    import uvicorn

    app = make_app(cfg, snapshot_hz=snapshot_hz)
    log.info("serving on ws://%s:%d/ws", host, port)
    uvicorn.run(app, host=host, port=port, log_level="warning")
