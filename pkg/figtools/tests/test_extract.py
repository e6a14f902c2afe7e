"""Word-table extraction: dummy source, HTTP endpoint, local weights.

The produced tables are checked against the engine only through its
command-line interface (``seqbai validate-table``), never by import.
"""

import csv
import json
import math
import shutil
import socket
import subprocess
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from figtools import (DummyUniformSource, ExtractionError, HttpLogprobSource,
                      extract_table, make_source)
from figtools.extract import _word_probs


def _validate_with_engine_cli(table_path):
    exe = shutil.which("seqbai")
    assert exe, "engine CLI not on PATH; install the main package first"
    proc = subprocess.run([exe, "validate-table", str(table_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    return proc.stdout


def _row_entropy(probs):
    p = np.asarray(probs, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


class TestDummySource:
    def test_table_passes_engine_validation(self, tmp_path):
        table, _ = extract_table("dummy", "the", J=100, M=1,
                                 table_out=tmp_path / "t.json")
        out = _validate_with_engine_cli(table)
        assert "100 words" in out

    def test_uniform_row_entropy_is_ln_100(self, tmp_path):
        table, entropy = extract_table(
            "dummy", "the", J=100, M=5,
            table_out=tmp_path / "t.json",
            entropy_out=tmp_path / "e.csv")
        data = json.load(open(table))
        assert abs(_row_entropy(data["initial"]) - math.log(100)) < 1e-9
        first_row = data["transitions"][data["vocab"][0]]
        assert abs(_row_entropy(list(first_row.values()))
                   - math.log(100)) < 1e-9
        rows = list(csv.DictReader(open(entropy)))
        assert len(rows) == 5
        for r in rows:
            assert abs(float(r["entropy"]) - math.log(100)) < 1e-9

    def test_every_row_sums_to_one(self, tmp_path):
        table, _ = extract_table("dummy:64", "x", J=32, M=1,
                                 table_out=tmp_path / "t.json")
        data = json.load(open(table))
        assert abs(sum(data["initial"]) - 1.0) < 1e-6
        for word in data["vocab"]:
            assert abs(sum(data["transitions"][word].values()) - 1.0) < 1e-6

    def test_vocabulary_below_J_is_an_error(self, tmp_path):
        with pytest.raises(ExtractionError, match="fewer than"):
            extract_table("dummy:10", "x", J=20, M=1,
                          table_out=tmp_path / "t.json")

    def test_bad_parameters(self, tmp_path):
        with pytest.raises(ExtractionError, match="J must be"):
            extract_table("dummy", "x", J=1, M=1,
                          table_out=tmp_path / "t.json")
        with pytest.raises(ExtractionError, match="M must be"):
            extract_table("dummy", "x", J=5, M=0,
                          table_out=tmp_path / "t.json")


class TestMakeSource:
    def test_dummy_sizes(self):
        assert len(DummyUniformSource(7).next_distribution("x")[0]) == 7
        src = make_source("dummy:12")
        assert len(src.next_distribution("x")[0]) == 12

    def test_http_url_gives_endpoint_client(self):
        src = make_source("https://example.invalid/v1", timeout=2.0)
        assert isinstance(src, HttpLogprobSource)
        assert src.timeout == 2.0

    def test_unknown_source_string(self):
        with pytest.raises(ExtractionError, match="unknown source"):
            make_source("ftp://nope")
        with pytest.raises(ExtractionError, match="bad dummy size"):
            make_source("dummy:many")


class TestWordCleanup:
    def test_space_markers_merge_with_plain_tokens(self):
        tokens = ["Ġcat", "cat", "▁dog", "", "  ", "two words"]
        order, mass = _word_probs(tokens, np.array([0.3, 0.2, 0.4, 0.05,
                                                    0.03, 0.02]))
        assert order == ["cat", "dog"]
        assert mass["cat"] == pytest.approx(0.5)
        assert mass["dog"] == pytest.approx(0.4)


# ---------------------------------------------------------------------------
# HTTP endpoint
# ---------------------------------------------------------------------------

class _StubHandler(BaseHTTPRequestHandler):
    """Fixed three-context model: 'p', 'p alpha', everything else."""

    def do_POST(self):
        n = int(self.headers.get("Content-Length", 0))
        body = json.loads(self.rfile.read(n))
        ctx = body["context"]
        if ctx == "p":
            # beta/gamma/delta tie at the cutoff; native order must win.
            tokens = ["alpha", "beta", "gamma", "delta"]
            probs = [0.4, 0.2, 0.2, 0.2]
        elif ctx == "p alpha":
            tokens = ["omega", "gamma", "beta"]  # omega is off-vocabulary
            probs = [0.5, 0.3, 0.2]
        else:
            tokens = ["alpha", "beta", "gamma"]
            probs = [0.5, 0.25, 0.25]
        payload = {"tokens": tokens,
                   "logprobs": [math.log(p) for p in probs]}
        data = json.dumps(payload).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_endpoint():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/complete"
    server.shutdown()
    thread.join(timeout=5)


class TestHttpSource:
    def test_extraction_with_native_order_tie_break(self, stub_endpoint,
                                                    tmp_path):
        table, _ = extract_table(stub_endpoint, "p", J=3, M=2,
                                 table_out=tmp_path / "t.json")
        data = json.load(open(table))
        # delta loses the three-way 0.2 tie because it comes last natively
        assert data["vocab"] == ["alpha", "beta", "gamma"]
        assert data["initial"] == pytest.approx([0.5, 0.25, 0.25])

    def test_rows_restrict_and_renormalize(self, stub_endpoint, tmp_path):
        table, _ = extract_table(stub_endpoint, "p", J=3, M=1,
                                 table_out=tmp_path / "t.json")
        row = json.load(open(table))["transitions"]["alpha"]
        # off-vocabulary omega (0.5) is dropped; gamma/beta renormalize
        assert row["gamma"] == pytest.approx(0.6)
        assert row["beta"] == pytest.approx(0.4)
        assert row["alpha"] == 0.0

    def test_unreachable_endpoint(self, tmp_path):
        with socket.socket() as s:  # grab a port nothing listens on
            s.bind(("127.0.0.1", 0))
            port = s.getsockname()[1]
        with pytest.raises(ExtractionError, match="failed"):
            extract_table(f"http://127.0.0.1:{port}/complete", "p",
                          J=3, M=1, table_out=tmp_path / "t.json",
                          )

    def test_malformed_payload(self, tmp_path):
        class BadHandler(BaseHTTPRequestHandler):
            def do_POST(self):
                data = b'{"tokens": ["a", "b"], "logprobs": [-0.1]}'
                self.send_response(200)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        server = ThreadingHTTPServer(("127.0.0.1", 0), BadHandler)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        try:
            url = f"http://127.0.0.1:{server.server_address[1]}/c"
            with pytest.raises(ExtractionError, match="2 tokens but"):
                extract_table(url, "p", J=2, M=1,
                              table_out=tmp_path / "t.json")
        finally:
            server.shutdown()
            thread.join(timeout=5)


# ---------------------------------------------------------------------------
# Local weights
# ---------------------------------------------------------------------------

def _build_tiny_model(directory):
    """A 17-token word-level causal LM with fixed random weights."""
    import torch
    from tokenizers import Tokenizer
    from tokenizers.models import WordLevel
    from tokenizers.pre_tokenizers import Whitespace
    from transformers import (GPT2Config, GPT2LMHeadModel,
                              PreTrainedTokenizerFast)

    words = [f"tok{i}" for i in range(16)]
    vocab = {w: i for i, w in enumerate(words)}
    vocab["[UNK]"] = 16
    tok = Tokenizer(WordLevel(vocab, unk_token="[UNK]"))
    tok.pre_tokenizer = Whitespace()
    fast = PreTrainedTokenizerFast(tokenizer_object=tok, unk_token="[UNK]")

    torch.manual_seed(20260825)
    config = GPT2Config(vocab_size=17, n_positions=16, n_embd=16,
                        n_layer=1, n_head=2)
    model = GPT2LMHeadModel(config)
    model.save_pretrained(directory)
    fast.save_pretrained(directory)
    return directory


class TestLocalWeightsSource:
    @pytest.fixture(scope="class")
    def tiny_model_dir(self, tmp_path_factory):
        pytest.importorskip("torch")
        pytest.importorskip("transformers")
        return _build_tiny_model(tmp_path_factory.mktemp("tiny_model"))

    def test_extraction_from_local_weights(self, tiny_model_dir, tmp_path):
        table, entropy = extract_table(
            f"hf:{tiny_model_dir}", "tok0 tok1", J=5, M=3,
            table_out=tmp_path / "t.json",
            entropy_out=tmp_path / "e.csv")
        data = json.load(open(table))
        assert len(data["vocab"]) == 5
        assert abs(sum(data["initial"]) - 1.0) < 1e-6
        for word in data["vocab"]:
            assert abs(sum(data["transitions"][word].values()) - 1.0) < 1e-6
        assert len(list(csv.DictReader(open(entropy)))) == 3
        _validate_with_engine_cli(table)

    def test_missing_model_path(self, tmp_path):
        pytest.importorskip("torch")
        pytest.importorskip("transformers")
        with pytest.raises(ExtractionError, match="could not load"):
            make_source(f"hf:{tmp_path / 'no_such_model'}")


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

class TestCli:
    def test_extract_and_render_round_trip(self, tmp_path):
        from figtools.cli import main
        table = tmp_path / "t.json"
        entropy = tmp_path / "e.csv"
        rc = main(["extract-table", "dummy", "--prompt", "the",
                   "--J", "20", "--M", "4",
                   "--table-out", str(table),
                   "--entropy-out", str(entropy)])
        assert rc == 0 and table.exists() and entropy.exists()
        out = tmp_path / "fig.png"
        rc = main(["render", "entropy_curve", "--csv", str(entropy),
                   "--out", str(out)])
        assert rc == 0 and out.stat().st_size > 1000

    def test_cli_reports_errors_without_traceback(self, tmp_path, capsys):
        rc = __import__("figtools.cli", fromlist=["main"]).main(
            ["extract-table", "dummy:5", "--prompt", "x", "--J", "10",
             "--M", "1", "--table-out", str(tmp_path / "t.json")])
        assert rc == 1
        assert "fewer than" in capsys.readouterr().err
