import pytest

from motionstitch import textaug
from motionstitch.errors import EmptyLabelList, SchemaError, UnknownConjunction
from motionstitch.textaug import (
    Conjunction,
    ConjunctionTable,
    compose_description,
    default_conjunctions,
    inflect_gerund,
    load_conjunctions,
)

# Hand-verified gerunds; this list is the oracle for the rule-based inflector.
GERUNDS_50 = {
    "walk": "walking", "run": "running", "sit": "sitting", "stand": "standing",
    "wave": "waving", "jump": "jumping", "kick": "kicking", "punch": "punching",
    "stretch": "stretching", "turn": "turning", "bend": "bending", "raise": "raising",
    "lift": "lifting", "throw": "throwing", "catch": "catching", "step": "stepping",
    "march": "marching", "jog": "jogging", "dance": "dancing", "spin": "spinning",
    "crouch": "crouching", "kneel": "kneeling", "crawl": "crawling", "climb": "climbing",
    "swim": "swimming", "hop": "hopping", "skip": "skipping", "lean": "leaning",
    "look": "looking", "nod": "nodding", "shake": "shaking", "clap": "clapping",
    "point": "pointing", "reach": "reaching", "pull": "pulling", "push": "pushing",
    "squat": "squatting", "lunge": "lunging", "flip": "flipping", "roll": "rolling",
    "slide": "sliding", "stomp": "stomping", "shrug": "shrugging", "grab": "grabbing",
    "toss": "tossing", "place": "placing", "put": "putting", "move": "moving",
    "stroll": "strolling", "lie": "lying",
}

LABEL_PAIRS = [
    ("walk", "wave"),
    ("sit down", "stretch"),
    ("run forward", "raise the left arm"),
    ("kick with the right leg", "nod"),
    ("jump", "clap"),
    ("crouch", "look left"),
    ("march in place", "shrug"),
    ("turn around", "wave with the right hand"),
    ("lean back", "point at the ceiling"),
    ("hop on one leg", "swing the arms"),
]


def test_gerund_50_verb_list():
    assert len(GERUNDS_50) == 50
    for verb, expected in GERUNDS_50.items():
        assert inflect_gerund(verb) == expected, verb


def test_gerund_on_phrases():
    assert inflect_gerund("wave with the right hand") == "waving with the right hand"
    assert inflect_gerund("sit down") == "sitting down"
    assert inflect_gerund("run") == "running"


def test_gerund_idempotent_on_outputs():
    for verb in GERUNDS_50:
        once = inflect_gerund(verb)
        assert inflect_gerund(once) == once


def test_gerund_exceptions():
    assert inflect_gerund("be") == "being"
    assert inflect_gerund("see") == "seeing"
    assert inflect_gerund("tie") == "tying"
    assert inflect_gerund("sing") == "singing"
    assert inflect_gerund("swing") == "swinging"
    assert inflect_gerund("mix") == "mixing"
    assert inflect_gerund("bow") == "bowing"
    assert inflect_gerund("play") == "playing"
    assert inflect_gerund("tiptoe") == "tiptoeing"
    assert inflect_gerund("carry") == "carrying"


def test_single_label_passthrough():
    assert compose_description(["walk"], seed=0) == "walk"
    assert textaug.test_description(["walk"], "while") == "walk"


def test_fixed_conjunction_while():
    table = ConjunctionTable((Conjunction("while", True, "infix"),))
    # with one entry the conjunction draw is forced; find a seed keeping order
    for seed in range(64):
        out = compose_description(["sit down", "stretch"], seed=seed, table=table)
        if out == "sit down while stretching":
            break
    else:
        pytest.fail("no seed produced the identity ordering")
    assert out == "sit down while stretching"


def test_test_description_examples():
    assert textaug.test_description(["walk", "wave"], "while") == "walk while waving"
    assert textaug.test_description(["walk", "wave"], "during") == "walk during waving"
    assert (
        textaug.test_description(["walk", "wave"], "and ... at the same time")
        == "walk and wave at the same time"
    )
    assert (
        textaug.test_description(["walk", "wave"], "at the same time")
        == "walk and wave at the same time"
    )
    assert (
        textaug.test_description(["walk", "wave"], "simultaneously")
        == "walk and wave simultaneously"
    )


def test_unknown_conjunction():
    with pytest.raises(UnknownConjunction):
        textaug.test_description(["walk", "wave"], "meanwhile")


def test_empty_labels_rejected():
    with pytest.raises(EmptyLabelList):
        compose_description([], seed=0)
    with pytest.raises(EmptyLabelList):
        compose_description(["walk", "   "], seed=0)
    with pytest.raises(EmptyLabelList):
        textaug.test_description([], "while")


def test_determinism_under_seed():
    for seed in range(20):
        a = compose_description(["walk", "wave"], seed=seed)
        b = compose_description(["walk", "wave"], seed=seed)
        assert a == b


def test_labels_are_normalized():
    out = textaug.test_description(["  WALK ", "Wave\tNow"], "while")
    assert out == "walk while waving now"


def _strip_gerund(word, originals):
    """Undo a possible -ing inflection by matching against the input verbs."""
    for verb in originals:
        if inflect_gerund(verb).split()[0] == word:
            return verb
    return word


def count_label_occurrences(output, label):
    """How many times the label's content words appear contiguously, allowing
    the first word to be inflected."""
    out_tokens = output.replace(",", "").split()
    lab_tokens = label.lower().split()
    hits = 0
    for i in range(len(out_tokens) - len(lab_tokens) + 1):
        window = out_tokens[i : i + len(lab_tokens)]
        if window[1:] == lab_tokens[1:] and (
            window[0] == lab_tokens[0] or window[0] == inflect_gerund(lab_tokens[0])
        ):
            hits += 1
    return hits


def test_coverage_and_single_template_over_seeded_runs():
    table = default_conjunctions()
    templates = [e.text for e in table.entries]
    for pair_idx, labels in enumerate(LABEL_PAIRS):
        for seed in range(20):
            out = compose_description(list(labels), seed=seed * 1000 + pair_idx)
            for label in labels:
                assert count_label_occurrences(out, label) == 1, (out, label)


def test_three_labels_single_conjunction():
    out = textaug.test_description(["walk", "jump", "wave"], "while")
    assert out == "walk, jump while waving"
    assert out.count("while") == 1


def test_conjunction_table_loading(tmp_path):
    p = tmp_path / "conj.json"
    p.write_text('[{"text": "as", "gerund": true, "placement": "infix"}]', encoding="utf-8")
    table = load_conjunctions(p)
    assert textaug.test_description(["walk", "wave"], "as", table) == "walk as waving"
    p.write_text("[]", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_conjunctions(p)
    p.write_text('[{"text": "x", "gerund": true, "placement": "sideways"}]', encoding="utf-8")
    with pytest.raises(SchemaError):
        load_conjunctions(p)
