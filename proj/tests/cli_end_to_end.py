"""Drives the codewatch binary against a live `serve` process."""

import json
import os
import subprocess
import sys
import tempfile
import time


def main(binary):
    with tempfile.TemporaryDirectory() as tmp:
        port_file = os.path.join(tmp, "port")
        store = os.path.join(tmp, "store")
        server = subprocess.Popen(
            [binary, "serve", "--bind", "127.0.0.1:0", "--store", store, "--port-file", port_file],
            stdout=subprocess.DEVNULL,
            stderr=subprocess.PIPE,
        )
        try:
            deadline = time.time() + 20
            while not (os.path.exists(port_file) and open(port_file).read().strip()):
                if time.time() > deadline or server.poll() is not None:
                    raise SystemExit("server did not start")
                time.sleep(0.05)
            url = "http://127.0.0.1:" + open(port_file).read().strip()
            run_session(binary, url, tmp, store)
        finally:
            server.terminate()
            server.wait(timeout=20)
    print("cli end-to-end ok")


def cw(binary, *args, env=None, expect=0):
    proc = subprocess.run([binary, *args], capture_output=True, text=True, env=env)
    if proc.returncode != expect:
        raise SystemExit(f"{' '.join(args)} -> {proc.returncode}\n{proc.stdout}\n{proc.stderr}")
    return proc.stdout


def run_session(binary, url, tmp, store):
    cw(binary, "create-user", "--server", url, "--new-username", "root", "--new-credential", "pw",
       "--permission", "Admin")
    token = json.loads(cw(binary, "login", "--server", url, "--username", "root", "--credential", "pw"))["token"]
    sam = json.loads(cw(binary, "create-user", "--server", url, "--token", token, "--new-username", "sam",
                        "--new-credential", "sam-pw", "--permission", "Subject"))
    assert "credential_hash" not in sam

    logs = []
    for i in range(3):
        logs.append({
            "session_id": f"s{i}",
            "user_id": sam["user_id"],
            "file_path": "main.py",
            "client_version": "0.1.0",
            "events": [
                {"type": "Start", "time": 100 * i},
                {"type": "Insertion", "time": 100 * i + 5, "text": f"value_{i} = compute({i})",
                 "line": f"value_{i} = compute({i})"},
                {"type": "End", "time": 100 * i + 9},
            ],
        })
    log_path = os.path.join(tmp, "logs.json")
    with open(log_path, "w") as fh:
        json.dump(logs, fh)

    env = dict(os.environ, CODEWATCH_SERVER=url, CODEWATCH_USERNAME="sam", CODEWATCH_CREDENTIAL="sam-pw")
    ids = json.loads(cw(binary, "submit", log_path, env=env))["ids"]
    assert len(ids) == 3, ids

    # Invalid log is rejected with an operational error.
    bad = dict(logs[0], events=logs[0]["events"][:2])
    bad_path = os.path.join(tmp, "bad.json")
    with open(bad_path, "w") as fh:
        json.dump(bad, fh)
    cw(binary, "submit", bad_path, env=env, expect=1)

    stored = json.loads(cw(binary, "query", "--user-id", sam["user_id"], env=env))
    assert [d["session_id"] for d in stored] == ["s0", "s1", "s2"], stored

    final_path = os.path.join(tmp, "final.py")
    with open(final_path, "w") as fh:
        fh.write("value_0 = compute(0)\nvalue_1 = compute(x + 1)\nprint('mine')\n")
    via_server = cw(binary, "classify", "--final", final_path, "--server", url, "--token", token)
    via_files = cw(binary, "classify", "--final", final_path, "--logs", log_path)
    via_store = cw(binary, "classify", "--final", final_path, "--store", store)
    assert via_server == via_files == via_store, (via_server, via_files, via_store)
    labels = [line["label"] for line in json.loads(via_files)["lines"]]
    assert labels == ["AIGenerated", "AIModified", "UserWritten"], labels

    cw(binary, "bogus-command", expect=2)


if __name__ == "__main__":
    main(sys.argv[1])
