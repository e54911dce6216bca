from texhtml.lexer import detokenize, tokenize
from texhtml.macros import ExpansionBudget, expand
from texhtml.packages import (IGNORED_SAFE, IMPLEMENTED, PackageHandler,
                              PackageRegistry, base_environment,
                              parse_handler_file)


def expand_text(source, extra_macros=()):
    tokens, _ = tokenize(source)
    env = base_environment()
    for macro in extra_macros:
        env.bind(macro)
    result = expand(tokens, env, ExpansionBudget())
    return detokenize(result.tokens)


def test_base_text_styles_pass_content_through():
    assert expand_text(r"\textbf{bold} \textit{it} \emph{em}") == "bold it em"


def test_base_escapes():
    assert expand_text(r"100\% \& \# \_ \$") == "100% & # _ $"


def test_known_packages_resolve():
    reg = PackageRegistry()
    for name in ("graphicx", "amsmath", "amssymb", "url", "xcolor", "enumitem"):
        handler = reg.resolve(name)
        assert handler is not None
        assert handler.kind == IMPLEMENTED


def test_ignore_list_resolves_as_safe():
    reg = PackageRegistry()
    handler = reg.resolve("geometry")
    assert handler is not None
    assert handler.kind == IGNORED_SAFE
    assert handler.provided_macros == ()


def test_unknown_package_resolves_to_none():
    assert PackageRegistry().resolve("tikz") is None


def test_register_strict_warns_on_replacement():
    reg = PackageRegistry()
    dup = PackageHandler("graphicx", (), IGNORED_SAFE)
    diags = reg.register(dup, strict=True)
    assert any(d.code == "handler-replaced" for d in diags)
    assert reg.resolve("graphicx").kind == IGNORED_SAFE
    assert reg.register(PackageHandler("fresh"), strict=True) == []


def test_handler_file_round_trip(tmp_path):
    text = (
        "kind implemented\n"
        "# comment line\n"
        "macro \\shout 1 #1!\n"
        "ignored \\mutter 1\n"
    )
    path = tmp_path / "noise.pkg"
    path.write_text(text)
    handler, diags = parse_handler_file(path)
    assert diags == []
    assert handler.name == "noise"
    assert {m.name for m in handler.provided_macros} == {"shout", "mutter"}

    reg = PackageRegistry()
    reg.load_directory(tmp_path)
    assert reg.resolve("noise") is not None
    assert expand_text(r"\shout{hey}", reg.resolve("noise").provided_macros) == "hey!"


def test_handler_file_bad_line_diagnosed(tmp_path):
    path = tmp_path / "bad.pkg"
    path.write_text("macro \\x notanumber body\nwat is this\n")
    handler, diags = parse_handler_file(path)
    assert handler is not None
    assert handler.provided_macros == ()
    assert len([d for d in diags if d.code == "bad-handler-file"]) == 2


def test_xcolor_textcolor_keeps_text_drops_color():
    macros = PackageRegistry().resolve("xcolor").provided_macros
    assert expand_text(r"\textcolor{red}{hi}", macros) == "hi"
