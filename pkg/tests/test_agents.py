import threading

import httpx
import pytest
from hypothesis import given
from hypothesis import strategies as st

from balancesim.agents import (
    ConstantAgent,
    EchoAgent,
    FixtureError,
    LLMAgent,
    RuleAgent,
    ScriptedAgent,
    make_agent,
)
from balancesim.dynamics import ExperimentConfig, Peer, UpdateContext, build_context, run_simulation
from balancesim.gateway import ChatClient, EndpointConfig
from balancesim.graph import InteractionMatrix, is_structurally_balanced, triad_initialization
from balancesim.kinds import InteractionKind, PromptDialect, UpdateMechanism
from balancesim.parser import ParsedAnswer, extract_sign

P, N = ParsedAnswer.POSITIVE, ParsedAnswer.NEGATIVE


def ctx(peers, reference=1, current=None, kind="appraisal", mech="homophily"):
    return UpdateContext(
        0, 1, InteractionKind(kind), UpdateMechanism(mech), reference,
        reference if current is None else current,
        tuple(Peer(k, a, b, 1) for k, (a, b) in enumerate(peers, start=2)),
    )


def test_rule_single_product():
    assert RuleAgent().decide(ctx([(1, 1)], reference=-1)).parsed is P
    assert RuleAgent().decide(ctx([(-1, 1)], reference=1)).parsed is N


def test_rule_tie_uses_reference():
    assert RuleAgent().decide(ctx([(1, 0)], reference=-1)).parsed is N
    assert RuleAgent().decide(ctx([(1, 1), (1, 1), (1, -1), (-1, 1)], reference=1)).parsed is P


def test_rule_text_parses_back():
    for kind in InteractionKind:
        d = RuleAgent().decide(ctx([(1, -1)], kind=kind.value))
        assert extract_sign(d.justification, kind) is d.parsed is N
        assert "Explanation:" in d.justification


@given(
    st.integers(3, 7).flatmap(lambda m: st.tuples(
        st.lists(st.sampled_from((-1, 1)), min_size=m * (m - 1), max_size=m * (m - 1)),
        st.permutations(range(m)),
    ).map(lambda t: (m,) + t)),
    st.sampled_from(list(UpdateMechanism)),
)
def test_rule_agent_is_equivariant(data, mech):
    m, vals, perm = data
    M = InteractionMatrix.from_list(m, vals)
    relabelled = InteractionMatrix.from_pairs(m, {(perm[i], perm[j]): M[i, j] for i, j in M.pairs()})
    agent = RuleAgent()
    for i, j in M.pairs():
        a = agent.decide(build_context(M, i, j, "opinion", mech)).parsed
        b = agent.decide(build_context(relabelled, perm[i], perm[j], "opinion", mech)).parsed
        assert a is b


@pytest.mark.parametrize("agent", [RuleAgent(), ConstantAgent(1), ConstantAgent(-1), EchoAgent()])
def test_deterministic_agents_are_pure(agent):
    c = build_context(triad_initialization(22), 1, 2, "relationship", "influence")
    first = agent.decide(c)
    assert all(agent.decide(c) == first for _ in range(5))


def test_constant_agent():
    c = ctx([(1, 1)])
    assert ConstantAgent(1).decide(c).parsed is P
    assert ConstantAgent(-1).decide(c).parsed is N
    assert ConstantAgent(0).decide(c).parsed is ParsedAnswer.NEUTRAL
    with pytest.raises(ValueError):
        ConstantAgent(2)


def test_constant_positive_reaches_all_positive():
    cfg = ExperimentConfig(T=10)
    for idx in (0, 17, 42):
        tr = run_simulation(cfg, triad_initialization(idx), ConstantAgent(1))
        assert tr.final == InteractionMatrix.uniform(3, 1)
        assert is_structurally_balanced(tr.final)


def test_echo_keeps_state():
    tr = run_simulation(ExperimentConfig(T=4), triad_initialization(9), EchoAgent())
    assert all(M == triad_initialization(9) for M in tr.matrices)


def test_scripted_agent():
    raw = "My new appraisal of Individual 0 will be negative.\n\nExplanation: Although I initially had a positive appraisal"
    agent = ScriptedAgent({(1, 2, 0): raw}, InteractionKind.APPRAISAL)
    c = UpdateContext(2, 0, InteractionKind.APPRAISAL, UpdateMechanism.INFLUENCE, 1, 1, (), 1)
    d = agent.decide(c)
    assert d.parsed is N and d.justification == raw
    with pytest.raises(FixtureError):
        agent.decide(UpdateContext(0, 2, InteractionKind.APPRAISAL, UpdateMechanism.INFLUENCE, 1, 1, (), 1))


def test_scripted_replay_reproduces_trajectory():
    cfg = ExperimentConfig(T=6, kind="opinion", mechanism="influence")
    original = run_simulation(cfg, triad_initialization(11), RuleAgent())
    dicts = [r.to_json() for r in original.decisions]
    replayed = run_simulation(cfg, triad_initialization(11), ScriptedAgent.from_records(dicts, cfg.kind))
    assert replayed.matrices == original.matrices
    assert [r.raw for r in replayed.decisions] == [r.raw for r in original.decisions]


def test_llm_agent_over_mock_endpoint():
    seen = []
    lock = threading.Lock()

    def handler(request):
        with lock:
            seen.append(request)
        return httpx.Response(200, json={"choices": [{"message": {"content": "New appraisal: negative\nJustification"}}]})

    client = ChatClient(EndpointConfig(base_url="http://mock/v1"), transport=httpx.MockTransport(handler))
    agent = LLMAgent(client, PromptDialect.MISTRAL)
    d = agent.decide(build_context(triad_initialization(63), 0, 1, "appraisal", "homophily"))
    assert d.parsed is N
    assert d.latency >= 0
    assert agent.label == "llama-3-70B-instruct"
    assert len(seen) == 1


def test_make_agent():
    assert isinstance(make_agent("rule"), RuleAgent)
    assert isinstance(make_agent("echo"), EchoAgent)
    assert make_agent("constant:-1").sign == -1
    assert isinstance(make_agent("llm", endpoint=EndpointConfig(base_url="http://mock/v1")), LLMAgent)
    with pytest.raises(ValueError):
        make_agent("oracle")
