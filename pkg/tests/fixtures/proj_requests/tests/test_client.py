import client


class StubResponse:
    def __init__(self, payload):
        self._payload = payload
        self.status_code = 200

    def raise_for_status(self):
        pass

    def json(self):
        return self._payload


class StubClient:
    def __init__(self, payload=None):
        self._payload = payload
        self.calls = []

    def get(self, url):
        self.calls.append(url)
        return StubResponse(self._payload)


def test_make_client_sets_auth_header():
    c = client.make_client("t0ken")
    assert c.headers["Authorization"] == "Bearer t0ken"


def test_fetch_json_requests_the_full_url():
    stub = StubClient({"ok": True})
    assert client.fetch_json(stub, "/todos/1") == {"ok": True}
    assert stub.calls == ["https://api.example.test/todos/1"]
