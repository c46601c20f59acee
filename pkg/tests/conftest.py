import random

import numpy as np
import pytest

from qedl.crf import CrfModel, extract_features, feature_strings
from qedl.kg import KgEntity, KgStore
from qedl.segmentation import Token

WORKED_LEXICON = {"孕妇": "n", "方便面": "n", "方便": "a", "吃": "v", "好": "a", "吗": "u"}


@pytest.fixture
def worked_store():
    entities = [
        KgEntity("孕妇", "孕妇", attributes={"描述": "怀孕 的 妇女"}, popularity=5000),
        KgEntity("方便面（快餐类面制食品）", "方便面", aliases=("泡面",),
                 attributes={"类型": "快餐类面制食品"}, popularity=1370),
        KgEntity("方便面（中国大陆歌手肖飞演唱歌曲）", "方便面",
                 attributes={"类型": "中国大陆歌手肖飞演唱歌曲"}, popularity=447),
        KgEntity("方便", "方便", popularity=900),
        KgEntity("吃", "吃", popularity=800),
        KgEntity("好", "好", popularity=700),
        KgEntity("吗", "吗", popularity=10),
    ]
    return KgStore(entities, WORKED_LEXICON, stopwords=["吗", "好"])


def char_tokens(text):
    return [Token(ch, i, i + 1, "n") for i, ch in enumerate(text)]


def random_observations(rng: random.Random, length: int, alphabet="abc"):
    text = "".join(rng.choice(alphabet) for _ in range(length))
    kg = []
    if length >= 2 and rng.random() < 0.5:
        s = rng.randrange(length - 1)
        kg = [(s, s + 2)]
    return extract_features(text, char_tokens(text), kg_spans=kg, df_table={"a": 3}, stopwords={"b"})


def random_model(obs_list, rng: np.random.Generator, scale=1.0, integer=False):
    feats = {}
    for obs in obs_list:
        for row in feature_strings(obs):
            for f in row:
                feats.setdefault(f, None)
    model = CrfModel.zeros(list(feats))
    draw = (lambda shape: rng.integers(-2, 3, size=shape).astype(float)) if integer \
        else (lambda shape: rng.normal(0.0, scale, size=shape))
    return model.with_weights(draw(model.n_params))


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
