"""Issue summaries pulled from the demo tracker."""

import requests

TRACKER = "https://api.example.test"


def fetch_status(client, path):
    response = client.get(TRACKER + path)
    return response.status_code


def format_row(issue):
    return f"{issue['id']:>4}  {issue['title']}"
