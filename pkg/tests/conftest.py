import pytest

from guardlog import FixedClock, Kernel, KernelConfig, seeded_id_gen
from guardlog.energy import CapacityConfig, CostTable


def make_kernel(tmp_path, name="k", lam=10_000, tick_ms=1000, **config_kw) -> Kernel:
    config = KernelConfig(
        capacity=CapacityConfig(lambda_per_sec=lam, tick_interval_ms=tick_ms),
        costs=CostTable(),
        **config_kw,
    )
    return Kernel.init(
        str(tmp_path / name),
        config=config,
        clock=FixedClock(),
        id_gen=seeded_id_gen(7),
    )


@pytest.fixture
def kernel(tmp_path):
    k = make_kernel(tmp_path)
    yield k
    k.close()


@pytest.fixture
def funded_kernel(tmp_path):
    """Kernel with alice (human, workspace/**), bot1 (agent), and one tick of
    energy already distributed."""
    k = make_kernel(tmp_path)
    k.register_actor("root", "alice", kind_human(), writable=[("workspace/**", "*")])
    k.register_actor("alice", "bot1", kind_agent(), purpose="docs assistant",
                     writable=[("workspace/docs/*", "mutate")])
    k.clock.advance(2_000_000_000)
    k.tick()
    yield k
    k.close()


def kind_human():
    from guardlog.model import ActorKind

    return ActorKind.HUMAN


def kind_agent():
    from guardlog.model import ActorKind

    return ActorKind.AGENT
