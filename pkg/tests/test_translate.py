import pytest

from conftest import closed_terms, deep
from ebgkit.env import Bind, visible
from ebgkit.lam import M, M1, OMEGA, App, Closure, Error, Global, IntLit, IntVal, Lam, Thunk, Var, parse
from ebgkit.mujava import (
    TRUE, ClassDef, Eql, If, JInt, JIntVal, JVar, Method0Def, Method1Def, New, Send,
    Send0, Seq, Set, This,
)
from ebgkit.translate import (
    VALUE_CLASSES, Agree, BothDiverge, Disagree, MuJavaRuntime, NotInImage, TranslationError,
    check_consistency, thunk_class, trans1, trans2, untrans1,
)


def test_trans1_integer():
    assert trans1(IntLit(3)) == JInt(3)


def test_trans1_variable_forces():
    assert trans1(Var("s")) == Send0(JVar("s"), "force")


def test_trans1_lambda_and_application():
    term = App(Lam("a", Var("a")), IntLit(2))
    closure = New(ClassDef(JVar("Closure"), (), Bind("apply", Method1Def("a", Send0(JVar("a"), "force")))))
    thunk = New(ClassDef(JVar("Thunk"), (), Bind("value", Method0Def(JInt(2)))))
    assert trans1(term) == Send(closure, "apply", thunk)


def test_trans1_of_m1_nests_two_closure_classes_and_thunks():
    image = trans1(M1)
    outer = image.class_expr
    assert outer.super_class == JVar("Closure")
    body = outer.methods.value.body
    assert isinstance(body, Send)
    assert body.target.class_expr.super_class == JVar("Closure")
    assert body.arg.class_expr.super_class == JVar("Thunk")
    assert body.arg.class_expr.methods.value.body.class_expr.super_class == JVar("Closure")


@pytest.mark.parametrize("name", ["null", "Thunk", "cache", "frame"])
def test_reserved_names_are_rejected(name):
    with pytest.raises(TranslationError):
        trans1(Lam(name, IntLit(0)))


def test_globals_have_no_translation():
    with pytest.raises(TranslationError):
        trans1(Global("P", "f"))


def test_untrans1_inverts_trans1_on_enumerated_terms():
    extra = [parse("\\x. \\x. x"), parse("\\f. f (f 3)"), M, M1]
    for term in [*closed_terms(6), *extra]:
        assert untrans1(trans1(term)) == term


def test_untrans1_rejects_foreign_terms():
    with pytest.raises(NotInImage):
        untrans1(Seq(JInt(1), JInt(2)))


def test_thunk_class_caches_through_the_null_test():
    cls = thunk_class()
    cache = JVar("cache")
    expected = If(Eql(cache, JVar("null")), Seq(Set("cache", Send0(This(), "value")), cache), cache)
    assert cls.attributes == ("cache",)
    assert cls.methods.value.body == expected
    assert [name for name, _ in VALUE_CLASSES] == ["Value", "IntVal", "Closure", "Thunk"]


def test_trans2_integer():
    assert trans2(JIntVal(1), MuJavaRuntime().heap) == IntVal(1)


def test_trans2_rejects_booleans():
    with pytest.raises(NotInImage):
        trans2(TRUE, MuJavaRuntime().heap)


def test_trans2_recovers_a_closure_capturing_a_thunk():
    runtime = MuJavaRuntime()
    outer = runtime.run(trans1(parse("\\x. \\y. y x")))
    inner = runtime.apply(outer, runtime.int_thunk(4))
    back = trans2(inner, runtime.heap)
    assert isinstance(back, Closure)
    assert back.param == "y"
    assert back.body == App(Var("y"), Var("x"))
    captured = visible(back.env)
    assert set(captured) == {"x"}
    assert captured["x"] == Thunk(_empty_like(captured["x"].env), IntLit(4))


def _empty_like(env):
    # runtime bindings are reserved names and translate to empty pieces
    assert visible(env) == {}
    return env


def test_trans2_shares_back_translations_of_one_object():
    runtime = MuJavaRuntime()
    value = runtime.run(trans1(parse("(\\t. \\a. \\b. t) 5")))
    inner = runtime.apply(value, runtime.int_thunk(1))
    back = trans2(inner, runtime.heap)
    assert isinstance(back, Closure) and back.param == "b"


def test_lambda_errors_map_to_errors():
    runtime = MuJavaRuntime()
    value = runtime.run(trans1(App(IntLit(0), IntLit(1))))
    assert isinstance(trans2(value, runtime.heap), Error)


@pytest.mark.parametrize("term,expected", [
    (M, Agree(IntVal(1))),
    (IntLit(42), Agree(IntVal(42))),
    (OMEGA, BothDiverge()),
])
def test_consistency_examples(term, expected):
    assert deep(check_consistency, term, 10**4) == expected


def test_consistency_on_closures_and_errors():
    for text in ["\\x.(\\y. y x)(\\z. x z)", "\\x. \\y. x", "0 1", "(\\f. f (f 0)) (\\z. z)"]:
        verdict = deep(check_consistency, parse(text), 10**4)
        assert not isinstance(verdict, Disagree), (text, verdict)


def test_checker_detects_a_mutated_translation(monkeypatch):
    import ebgkit.translate as translate

    honest = translate.trans1

    def off_by_one(term):
        if isinstance(term, IntLit):
            return JInt(term.n + 1)
        return honest(term)

    monkeypatch.setattr(translate, "trans1", off_by_one)
    assert isinstance(deep(check_consistency, IntLit(3), 10**4), Disagree)


def _memo_program(n):
    term = IntLit(0)
    for _ in range(n):
        term = App(Var("f"), term)
    return App(Lam("f", term), parse("(\\w. w) (\\z. z)"))


def _value_counts(machine):
    return [count for (message, _), count in machine.sends.items() if message == "value"]


def test_mujava_thunks_run_their_body_once():
    def run():
        runtime = MuJavaRuntime(10**5)
        value = runtime.run(trans1(_memo_program(4)))
        return value, runtime.machine

    value, machine = deep(run)
    assert value == JIntVal(0)
    forces = [c for (m, _), c in machine.sends.items() if m == "force"]
    assert max(forces) >= 4
    assert max(_value_counts(machine)) == 1


def test_an_uncached_thunk_class_would_rerun_bodies():
    uncached = ClassDef(thunk_class().super_class, ("cache",), Bind("force", Method0Def(Send0(This(), "value"))))
    classes = (*VALUE_CLASSES[:3], ("Thunk", uncached))

    def run():
        runtime = MuJavaRuntime(10**5, classes)
        runtime.run(trans1(_memo_program(4)))
        return runtime.machine

    assert max(_value_counts(deep(run))) >= 4
