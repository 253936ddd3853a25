import pytest

from llfp.corpus import NAMES, corpus_path, corpus_text, load_corpus
from llfp.kernel import run_directives
from llfp.oracles import default_env
from llfp.parser import CheckItem, parse_file, print_file


def test_all_files_load():
    srcs = load_corpus()
    assert set(srcs) == set(NAMES)
    for name in NAMES:
        assert corpus_path(name).is_file()


@pytest.mark.parametrize("name", NAMES)
def test_every_directive_behaves_as_annotated(name):
    env = default_env()
    reports = run_directives(load_corpus()[name], env)
    bad = [(r.item.line, r.error) for r in reports if not r.as_expected]
    assert bad == []
    assert any(isinstance(r.item, CheckItem) and r.ok for r in reports)


@pytest.mark.parametrize("name", NAMES)
def test_files_reprint(name):
    src = load_corpus()[name]
    again = parse_file(print_file(src.items))
    assert [type(i) for i in again.items] == [type(i) for i in src.items]
    assert again.signature == src.signature


def test_worked_chain_needs_no_oracle():
    src = load_corpus()["lambda_v"]
    env = default_env()
    reports = run_directives(src, env)
    chain = [r for r in reports if isinstance(r.item, CheckItem)][:4]
    assert all(r.ok for r in chain)
    assert all(r.trace == [] for r in chain)


def test_expected_failures_are_present():
    for name in NAMES:
        assert "%expect-fail" in corpus_text(name)
