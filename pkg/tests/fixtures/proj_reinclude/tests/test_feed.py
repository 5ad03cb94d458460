import feed


class StubResponse:
    def __init__(self, payload):
        self._payload = payload

    def raise_for_status(self):
        pass

    def json(self):
        return self._payload


class StubClient:
    def __init__(self, payload):
        self._payload = payload

    def get(self, url):
        return StubResponse(self._payload)


def test_fetch_entries_unwraps_payload():
    stub = StubClient({"entries": [{"title": "a"}]})
    assert feed.fetch_entries(stub, "http://x/feed") == [{"title": "a"}]


def test_summarize_joins_titles():
    assert feed.summarize([{"title": "a"}, {"title": "b"}]) == "a, b"
