import report
from test_client import StubClient


def test_fetch_status_returns_the_code():
    stub = StubClient()
    assert report.fetch_status(stub, "/issues/7") == 200
    assert stub.calls == ["https://api.example.test/issues/7"]


def test_format_row_aligns_ids():
    assert report.format_row({"id": 9, "title": "crash"}) == "   9  crash"
