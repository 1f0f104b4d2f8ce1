"""Streaming server hosting the simulation loop.

One asyncio task owns all mutable simulation state; connection handlers only
enqueue commands and receive immutable snapshots. Clients talk JSON envelopes
over a WebSocket endpoint (/ws) or over plain TCP with length-prefixed frames
(see PROTOCOL.md). Exactly one client at a time may hold the pilot role,
which gates every motion command. Snapshot fan-out never blocks the loop:
slow clients fall back to latest-snapshot-wins.
"""
from __future__ import annotations

import asyncio
import contextlib
import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

from websockets.asyncio.server import serve as ws_serve
from websockets.exceptions import ConnectionClosed

from .arm_model import RobotModel, forward_kinematics, manipulability
from .moa_metrics import AnalysisError, MetricConfig, analyze_log
from .protocol import (
    CLIENT_MESSAGE_TYPES,
    PROTOCOL_VERSION,
    Envelope,
    FrameDecoder,
    ProtocolError,
    decode,
    encode,
    frame,
)
from .sim_exec import (
    ControllerGains,
    MotionRuntime,
    SimError,
    SimMode,
)
from .teleop import BindingMap, InputEvent, TeleopConfig, save_events
from .timeline import TimelineError, sequence_from_dict

log = logging.getLogger(__name__)

PILOT_ONLY_TYPES = frozenset(
    {"input", "mode_set", "preset_goto", "fault_clear", "seq_play", "seq_stop"}
)


@dataclass(frozen=True)
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8765                  # WebSocket endpoint /ws
    tcp_port: Optional[int] = None    # framed-TCP variant; default port + 1
    broadcast_rate: float = 50.0      # snapshot Hz
    fast: bool = False                # free-run instead of wall-clock pacing
    record_events: Optional[str] = None  # write applied input events on shutdown

    @property
    def effective_tcp_port(self) -> int:
        return self.tcp_port if self.tcp_port is not None else self.port + 1


class _Session:
    def __init__(self, sid: int, kind: str):
        self.id = sid
        self.kind = kind
        self.replies: asyncio.Queue[bytes] = asyncio.Queue(maxsize=1024)
        self.latest_snapshot: Optional[bytes] = None
        self.snapshot_serial = 0
        self._sent_serial = 0
        self.wake = asyncio.Event()
        self.closed = False
        self.out_seq = 0

    def next_seq(self) -> int:
        self.out_seq += 1
        return self.out_seq

    def push_reply(self, data: bytes) -> None:
        try:
            self.replies.put_nowait(data)
        except asyncio.QueueFull:
            log.warning("session %d reply queue overflow; dropping client", self.id)
            self.closed = True
        self.wake.set()

    def push_snapshot(self, data: bytes) -> None:
        self.latest_snapshot = data
        self.snapshot_serial += 1
        self.wake.set()

    def take_snapshot(self) -> Optional[bytes]:
        if self.snapshot_serial == self._sent_serial:
            return None
        self._sent_serial = self.snapshot_serial
        return self.latest_snapshot


class StudioServer:
    """Hosts a MotionRuntime behind the wire protocol."""

    def __init__(
        self,
        model: RobotModel,
        gains: Optional[ControllerGains] = None,
        bindings: Optional[BindingMap] = None,
        teleop_cfg: Optional[TeleopConfig] = None,
        metric_cfg: Optional[MetricConfig] = None,
        config: Optional[ServerConfig] = None,
    ):
        self.cfg = config or ServerConfig()
        self.model = model
        self.metric_cfg = metric_cfg or MetricConfig()
        self.runtime = MotionRuntime(
            model, gains=gains, bindings=bindings, teleop_cfg=teleop_cfg
        )
        self.sessions: dict[int, _Session] = {}
        self.pilot: Optional[int] = None
        self.commands: asyncio.Queue[tuple[int, Envelope]] = asyncio.Queue()
        self._next_sid = 0
        self._running = False
        self._tasks: list[asyncio.Task] = []
        self._ws_server = None
        self._tcp_server = None
        self._last_uploaded: Optional[str] = None

    # -- lifecycle -----------------------------------------------------------

    async def start(self) -> None:
        self._running = True
        self._ws_server = await ws_serve(
            self._handle_ws, self.cfg.host, self.cfg.port, max_size=2**24
        )
        self._tcp_server = await asyncio.start_server(
            self._handle_tcp, self.cfg.host, self.cfg.effective_tcp_port
        )
        self._tasks.append(asyncio.create_task(self._sim_loop(), name="sim-loop"))
        log.info(
            "serving model %r on ws://%s:%d/ws (tcp %d), %s",
            self.model.name,
            self.cfg.host,
            self.cfg.port,
            self.cfg.effective_tcp_port,
            "fast" if self.cfg.fast else f"{self.cfg.broadcast_rate} Hz real-time",
        )

    async def stop(self) -> None:
        self._running = False
        for task in self._tasks:
            task.cancel()
        for task in self._tasks:
            with contextlib.suppress(asyncio.CancelledError):
                await task
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self.cfg.record_events:
            save_events(self.runtime.session_events, Path(self.cfg.record_events))
            log.info(
                "wrote %d recorded events to %s",
                len(self.runtime.session_events),
                self.cfg.record_events,
            )

    async def serve_forever(self) -> None:
        await self.start()
        try:
            await asyncio.gather(*self._tasks)
        finally:
            await self.stop()

    # -- simulation loop -----------------------------------------------------

    async def _sim_loop(self) -> None:
        loop = asyncio.get_running_loop()
        period = 1.0 / self.cfg.broadcast_rate
        steps_per_tick = max(1, round(period / self.runtime.dt))
        deadline = loop.time() + period
        while self._running:
            while True:
                try:
                    sid, env = self.commands.get_nowait()
                except asyncio.QueueEmpty:
                    break
                self._dispatch(sid, env)
            notes = self.runtime.run_steps(steps_per_tick)
            self._broadcast("snapshot", self._snapshot_payload())
            for note in notes:
                event = note.pop("event")
                self._broadcast(event, note)
            if self.cfg.fast:
                await asyncio.sleep(0)
            else:
                now = loop.time()
                delay = deadline - now
                if delay > 0:
                    await asyncio.sleep(delay)
                elif delay < -0.25:
                    deadline = now  # resync after a stall instead of bursting
                deadline += period

    def _snapshot_payload(self) -> dict:
        state = self.runtime.state
        tele = self.runtime.teleop
        pose = forward_kinematics(self.model, state.q)
        payload = {
            "t": state.t,
            "q": state.q.tolist(),
            "qd": state.qd.tolist(),
            "gripper": state.gripper,
            "ee_pose": pose.to_dict(),
            "mode": state.mode.value,
            "fault": tele.fault.value if tele.fault else None,
            "manipulability": manipulability(self.model, state.q),
            "teleop": {
                "control_mode": tele.mode.value,
                "selected_joint": tele.selected_joint,
                "joint_speed_scale": tele.joint_speed_scale,
                "cart_speed_scale": tele.cart_speed_scale,
                "inertia_enabled": tele.inertia_enabled,
                "gripper_cmd": tele.gripper_cmd,
            },
        }
        if self.runtime.playing and self.runtime.playback is not None:
            payload["playing"] = self.runtime.playback.name
        return payload

    def _broadcast(self, msg_type: str, payload: dict) -> None:
        for session in list(self.sessions.values()):
            if session.closed:
                continue
            env = Envelope(type=msg_type, seq_no=session.next_seq(), payload=payload)
            data = encode(env)
            if msg_type == "snapshot":
                session.push_snapshot(data)
            else:
                session.push_reply(data)

    # -- command dispatch (runs on the simulation task) -----------------------

    def _reply(self, session: _Session, msg_type: str, payload, reply_to: int) -> None:
        env = Envelope(
            type=msg_type, seq_no=session.next_seq(), payload=payload, reply_to=reply_to
        )
        session.push_reply(encode(env))

    def _dispatch(self, sid: int, env: Envelope) -> None:
        session = self.sessions.get(sid)
        if session is None or session.closed:
            return
        if env.type in PILOT_ONLY_TYPES and self.pilot != sid:
            self._reply(session, "not_pilot", {"reason": "pilot role required"}, env.seq_no)
            return
        try:
            self._handle(session, env)
        except SimError as exc:
            kind = "busy" if "busy" in str(exc) else "error"
            self._reply(session, kind, {"reason": str(exc)}, env.seq_no)
        except (TimelineError, AnalysisError, KeyError, ValueError) as exc:
            self._reply(session, "error", {"reason": str(exc)}, env.seq_no)

    def _handle(self, session: _Session, env: Envelope) -> None:
        payload = env.payload if isinstance(env.payload, dict) else {}
        t = env.type

        if t == "pilot_acquire":
            if self.pilot is None or self.pilot == session.id:
                self.pilot = session.id
                self._reply(session, "pilot_granted", {}, env.seq_no)
            else:
                self._reply(
                    session, "pilot_denied", {"reason": "pilot role already held"}, env.seq_no
                )
        elif t == "pilot_release":
            if self.pilot == session.id:
                self.pilot = None
                self._reply(session, "pilot_released", {}, env.seq_no)
            else:
                self._reply(session, "not_pilot", {"reason": "not the pilot"}, env.seq_no)
        elif t == "input":
            if self.runtime.state.mode is not SimMode.TELEOP:
                raise SimError("input requires teleop mode (send mode_set first)")
            event = InputEvent.from_dict({"t": 0.0, **payload})
            self.runtime.apply_event(event)
        elif t == "mode_set":
            mode = SimMode(str(payload.get("mode", "")))
            self.runtime.set_sim_mode(mode)
            self._reply(session, "ok", {"mode": mode.value}, env.seq_no)
        elif t == "preset_goto":
            request = self.runtime.request_preset(str(payload["name"]))
            self._reply(
                session,
                "ok",
                {"preset": request.name, "duration": request.duration},
                env.seq_no,
            )
        elif t == "fault_clear":
            self.runtime.clear_fault()
            self._reply(session, "ok", {}, env.seq_no)
        elif t == "seq_upload":
            seq = sequence_from_dict(payload["sequence"])
            self.runtime.upload_sequence(seq)
            self._last_uploaded = seq.name
            self._reply(session, "ok", {"name": seq.name}, env.seq_no)
        elif t == "seq_play":
            name = payload.get("name") or self._last_uploaded
            if name is None:
                raise ValueError("no sequence uploaded yet")
            record_rate = payload.get("record_rate")
            log_id = self.runtime.start_sequence(name, record_rate)
            self._reply(session, "ok", {"log_id": log_id}, env.seq_no)
        elif t == "seq_stop":
            self.runtime.stop_playback()
            self._reply(session, "ok", {}, env.seq_no)
        elif t == "log_fetch":
            log_id = str(payload["log_id"])
            if log_id not in self.runtime.logs:
                raise KeyError(f"unknown log id {log_id!r}")
            self._reply(
                session,
                "log",
                {"log_id": log_id, "log": self.runtime.logs[log_id].to_dict()},
                env.seq_no,
            )
        elif t == "analyze":
            log_id = str(payload["log_id"])
            if log_id not in self.runtime.logs:
                raise KeyError(f"unknown log id {log_id!r}")
            cfg = (
                MetricConfig.from_dict(payload["config"])
                if payload.get("config")
                else self.metric_cfg
            )
            report = analyze_log(
                self.runtime.logs[log_id],
                self.model,
                cfg,
                impressions=payload.get("impressions"),
                meaning=payload.get("meaning"),
                intended=payload.get("intended"),
            )
            self._reply(
                session, "report", {"log_id": log_id, "report": report.to_dict()}, env.seq_no
            )
        elif t == "config_get":
            self._reply(session, "config", self._config_payload(), env.seq_no)
        else:
            raise ValueError(f"unhandled message type {t!r}")

    def _config_payload(self) -> dict:
        return {
            "protocol_version": PROTOCOL_VERSION,
            "model": self.model.to_dict(),
            "gains": self.runtime.gains.to_dict(),
            "teleop": asdict(self.runtime.teleop_cfg),
            "metric": self.metric_cfg.to_dict(),
            "bindings": self.runtime.bindings.to_dict(),
            "broadcast_rate": self.cfg.broadcast_rate,
            "dt": self.runtime.dt,
        }

    def _hello_data(self, session: _Session) -> bytes:
        payload = {
            "protocol_version": PROTOCOL_VERSION,
            "model": self.model.to_dict(),
            "broadcast_rate": self.cfg.broadcast_rate,
            "bindings": self.runtime.bindings.to_dict(),
        }
        return encode(Envelope(type="hello", seq_no=session.next_seq(), payload=payload))

    # -- connection plumbing ---------------------------------------------------

    def _register(self, kind: str) -> _Session:
        self._next_sid += 1
        session = _Session(self._next_sid, kind)
        self.sessions[session.id] = session
        return session

    def _unregister(self, session: _Session) -> None:
        session.closed = True
        session.wake.set()
        self.sessions.pop(session.id, None)
        if self.pilot == session.id:
            self.pilot = None

    def _accept_frame(self, session: _Session, raw) -> None:
        try:
            env = decode(raw)
        except ProtocolError as exc:
            self._reply(session, "error", {"reason": str(exc)}, 0)
            return
        if env.type not in CLIENT_MESSAGE_TYPES:
            self._reply(
                session,
                "error",
                {"reason": f"unknown message type {env.type!r}"},
                env.seq_no,
            )
            return
        self.commands.put_nowait((session.id, env))

    async def _handle_ws(self, websocket) -> None:
        path = websocket.request.path if websocket.request else ""
        if path.rstrip("/") != "/ws" and path != "":
            await websocket.close(code=1008, reason="connect to /ws")
            return
        session = self._register("ws")
        try:
            await websocket.send(self._hello_data(session))
            sender = asyncio.create_task(self._ws_sender(session, websocket))
            try:
                async for message in websocket:
                    self._accept_frame(session, message)
            finally:
                sender.cancel()
                with contextlib.suppress(asyncio.CancelledError):
                    await sender
        except ConnectionClosed:
            pass
        finally:
            self._unregister(session)

    async def _ws_sender(self, session: _Session, websocket) -> None:
        try:
            while not session.closed:
                await session.wake.wait()
                session.wake.clear()
                while not session.replies.empty():
                    await websocket.send(session.replies.get_nowait())
                snap = session.take_snapshot()
                if snap is not None:
                    await websocket.send(snap)
        except ConnectionClosed:
            session.closed = True

    async def _handle_tcp(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        session = self._register("tcp")
        decoder = FrameDecoder()
        try:
            writer.write(frame(self._hello_data(session)))
            await writer.drain()
            sender = asyncio.create_task(self._tcp_sender(session, writer))
            try:
                while True:
                    data = await reader.read(65536)
                    if not data:
                        break
                    try:
                        bodies = decoder.feed(data)
                    except ProtocolError as exc:
                        self._reply(session, "error", {"reason": str(exc)}, 0)
                        break
                    for body in bodies:
                        self._accept_frame(session, body)
            finally:
                sender.cancel()
                with contextlib.suppress(asyncio.CancelledError):
                    await sender
        except (ConnectionResetError, BrokenPipeError):
            pass
        finally:
            self._unregister(session)
            with contextlib.suppress(Exception):
                writer.close()
                await writer.wait_closed()

    async def _tcp_sender(self, session: _Session, writer: asyncio.StreamWriter) -> None:
        try:
            while not session.closed:
                await session.wake.wait()
                session.wake.clear()
                while not session.replies.empty():
                    writer.write(frame(session.replies.get_nowait()))
                snap = session.take_snapshot()
                if snap is not None:
                    writer.write(frame(snap))
                await writer.drain()
        except (ConnectionResetError, BrokenPipeError):
            session.closed = True
