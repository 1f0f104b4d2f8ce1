import asyncio
import contextlib
import json

import numpy as np
import pytest

from motion_studio.arm_model import JointSpec, RobotModel
from motion_studio.protocol import Envelope, FrameDecoder, decode, encode, frame
from motion_studio.resources import builtin_model
from motion_studio.server import ServerConfig, StudioServer
from motion_studio.sim_exec import ControllerGains


@pytest.fixture(scope="session")
def twolink() -> RobotModel:
    return builtin_model("twolink")


@pytest.fixture(scope="session")
def articulated3() -> RobotModel:
    return builtin_model("articulated3")


def make_single_joint(
    limits=(-3.0, 3.0), vel_limit=50.0, inertia=1.0, damping=0.0
) -> RobotModel:
    return RobotModel(
        "single",
        (
            JointSpec(
                a=1.0,
                alpha=0.0,
                d=0.0,
                limits=limits,
                vel_limit=vel_limit,
                inertia=inertia,
                damping=damping,
            ),
        ),
        presets={"home": (0.0,)},
    )


def critically_damped_gains(model: RobotModel, wn: float = 10.0) -> ControllerGains:
    inertia = model.inertias
    return ControllerGains(
        kp=wn * wn * inertia, kd=2.0 * wn * inertia, torque_limit=1e6 * np.ones_like(inertia)
    )


class TcpStudioClient:
    """Minimal framed-TCP protocol client for tests."""

    def __init__(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        self.reader = reader
        self.writer = writer
        self.decoder = FrameDecoder()
        self.inbox: list[Envelope] = []
        self._seq = 0

    @classmethod
    async def connect(cls, port: int, host: str = "127.0.0.1") -> "TcpStudioClient":
        reader, writer = await asyncio.open_connection(host, port)
        return cls(reader, writer)

    async def send(self, msg_type: str, payload=None) -> int:
        self._seq += 1
        data = frame(encode(Envelope(type=msg_type, seq_no=self._seq, payload=payload)))
        self.writer.write(data)
        await self.writer.drain()
        return self._seq

    async def send_raw(self, body: bytes) -> None:
        self.writer.write(frame(body))
        await self.writer.drain()

    async def recv(self, timeout: float = 5.0) -> Envelope:
        if self.inbox:
            return self.inbox.pop(0)
        while True:
            data = await asyncio.wait_for(self.reader.read(65536), timeout)
            if not data:
                raise ConnectionError("server closed the connection")
            frames = self.decoder.feed(data)
            if frames:
                envs = [decode(f) for f in frames]
                self.inbox.extend(envs[1:])
                return envs[0]

    async def recv_type(self, msg_type: str, timeout: float = 5.0) -> Envelope:
        deadline = asyncio.get_event_loop().time() + timeout
        while True:
            remaining = deadline - asyncio.get_event_loop().time()
            if remaining <= 0:
                raise TimeoutError(f"no {msg_type!r} message within {timeout}s")
            env = await self.recv(remaining)
            if env.type == msg_type:
                return env

    async def close(self):
        self.writer.close()
        with contextlib.suppress(Exception):
            await self.writer.wait_closed()


@contextlib.asynccontextmanager
async def running_server(model, fast=True, rate=50.0, record_events=None, **kwargs):
    cfg = ServerConfig(
        port=0, tcp_port=0, broadcast_rate=rate, fast=fast, record_events=record_events
    )
    server = StudioServer(model, config=cfg, **kwargs)
    await server.start()
    try:
        yield server
    finally:
        await server.stop()


def ws_port(server: StudioServer) -> int:
    return server._ws_server.sockets[0].getsockname()[1]


def tcp_port(server: StudioServer) -> int:
    return server._tcp_server.sockets[0].getsockname()[1]


def write_json(path, data) -> None:
    path.write_text(json.dumps(data, indent=2) + "\n")
