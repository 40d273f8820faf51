"""Drive a live `ivf serve` and validate every response against the published schemas.

Usage: check_service.py <ivf-binary> <schema-dir> <source-dir>
"""

import json
import os
import re
import socket
import subprocess
import sys
import tempfile
import time
import urllib.error
import urllib.request

from jsonschema import Draft202012Validator
from referencing import Registry, Resource

IVF, SCHEMA_DIR, SOURCE_DIR = sys.argv[1:4]
TOKEN = "schema-check"

with open(os.path.join(SCHEMA_DIR, "ivf.schema.json")) as f:
    SCHEMA = json.load(f)
with open(os.path.join(SCHEMA_DIR, "openapi.json")) as f:
    OPENAPI = json.load(f)

REGISTRY = Registry().with_resource(SCHEMA["$id"], Resource.from_contents(SCHEMA))
failures = []
checked = 0


def validator_for(defname):
    return Draft202012Validator({"$ref": SCHEMA["$id"] + "#/$defs/" + defname}, registry=REGISTRY)


def route_for(path):
    """Match a concrete path against the templated OpenAPI paths."""
    for template in OPENAPI["paths"]:
        pattern = "^" + re.sub(r"\{[^}]+\}", "[^/]+", template) + "$"
        if re.match(pattern, path):
            return template
    return None


def check(method, path, status, ctype, body):
    global checked
    checked += 1
    where = f"{method} {path} -> {status}"
    template = route_for(path.split("?")[0])
    if template is None:
        if status == 404:
            errors = list(validator_for("Error").iter_errors(json.loads(body)))
            if errors:
                failures.append(f"{where}: {errors[0].message}")
            return
        failures.append(f"{where}: no documented route")
        return
    op = OPENAPI["paths"][template].get(method.lower())
    if op is None or str(status) not in op["responses"]:
        failures.append(f"{where}: status not documented")
        return
    content = op["responses"][str(status)]["content"]
    media = ctype.split(";")[0].strip()
    if media not in content:
        failures.append(f"{where}: content type {media} not documented")
        return
    schema = content[media]["schema"]
    if "$ref" not in schema:
        return
    defname = schema["$ref"].split("/")[-1]
    errors = list(validator_for(defname).iter_errors(json.loads(body)))
    for e in errors[:3]:
        failures.append(f"{where}: {defname} {list(e.absolute_path)}: {e.message}")


def call(method, path, body=None, token=TOKEN, expect=None):
    data = None if body is None else (body if isinstance(body, str) else json.dumps(body)).encode()
    req = urllib.request.Request(BASE + path, data=data, method=method)
    req.add_header("Content-Type", "application/json")
    if token:
        req.add_header("Authorization", "Bearer " + token)
    try:
        with urllib.request.urlopen(req, timeout=30) as r:
            status, ctype, text = r.status, r.headers.get("Content-Type", ""), r.read().decode()
    except urllib.error.HTTPError as e:
        status, ctype, text = e.code, e.headers.get("Content-Type", ""), e.read().decode()
    check(method, path, status, ctype, text)
    if expect is not None and status != expect:
        failures.append(f"{method} {path}: expected {expect}, got {status}: {text[:200]}")
    return status, (json.loads(text) if ctype.startswith("application/json") else text)


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def start_server(store):
    for _ in range(5):
        port = free_port()
        proc = subprocess.Popen([IVF, "serve", "--listen", f"127.0.0.1:{port}", "--store", store,
                                 "--token", TOKEN], stdout=subprocess.DEVNULL, stderr=subprocess.PIPE)
        deadline = time.time() + 10
        while time.time() < deadline and proc.poll() is None:
            try:
                with socket.create_connection(("127.0.0.1", port), timeout=0.2):
                    return proc, port
            except OSError:
                time.sleep(0.05)
        proc.kill()
        proc.wait()
    sys.exit("could not start ivf serve")


def main():
    global BASE
    tmp = tempfile.mkdtemp(prefix="ivf-schema-")
    proc, port = start_server(os.path.join(tmp, "store.db"))
    BASE = f"http://127.0.0.1:{port}"
    try:
        drive(tmp)
    finally:
        proc.terminate()
        proc.wait(timeout=10)
    print(f"{checked} responses checked, {len(failures)} failures")
    for f in failures:
        print("  " + f)
    return 1 if failures else 0


def drive(tmp):
    # The validator must be able to fail.
    if validator_for("Health").is_valid({"status": "down"}):
        failures.append("schema validator accepts an invalid Health document")
    _, health = call("GET", "/health", token=None, expect=200)
    call("GET", "/export", token=None, expect=401)
    call("GET", "/export", token="wrong", expect=401)
    call("GET", "/nowhere", expect=404)

    cohort = json.loads(subprocess.check_output([IVF, "synth", "--synthetic", "seed=11,patients=4"]))
    for p in cohort["patients"]:
        call("POST", "/patients", p, expect=201)
        call("GET", f"/patients/{p['patient_id']}", expect=200)
    call("GET", "/patients/ghost", expect=404)
    call("POST", "/patients", "{not json", expect=400)
    call("POST", "/patients", {"patient_id": "young", "age": 3}, expect=400)

    # Engine-driven cycles: the doctor's recorded choices are dropped from the body.
    for v in cohort["visits"]:
        pid, cyc = v["patient_id"], v["cycle_number"]
        body = {k: v[k] for k in ("visit_date", "panel", "exam")}
        path = f"/patients/{pid}/cycles/{cyc}/advice"
        call("POST", path + "?dry_run=true", body)
        call("POST", path, body)
        status, _ = call("POST", path, body)
        if status not in (409, 410):
            failures.append(f"POST {path}: repeated visit gave {status}")
    for pid, cyc in sorted({(v["patient_id"], v["cycle_number"]) for v in cohort["visits"]}):
        call("GET", f"/patients/{pid}/cycles/{cyc}", expect=200)
    call("GET", "/patients/ghost/cycles/1", expect=404)
    call("GET", f"/patients/{cohort['patients'][0]['patient_id']}/cycles/0", expect=400)

    # Raw EMR strings on the visits route, then the same date again.
    pid = cohort["patients"][0]["patient_id"]
    raw = {"patient_id": pid, "cycle_number": 2, "visit_date": "2025-06-02",
           "panel": {"fsh": "7.1", "lh": "<0.1", "e2": "41", "p4": "0.4"}, "exam": "12x2, 9x3"}
    call("POST", "/visits", raw, expect=201)
    call("POST", "/visits", raw, expect=409)
    call("POST", "/visits", dict(raw, panel={"fsh": "apples", "lh": 1, "e2": 1, "p4": 1}), expect=400)
    call("POST", "/visits", dict(raw, patient_id="ghost"))

    call("POST", "/replay", {}, expect=200)
    call("POST", "/replay", {"synthetic": "seed=5,patients=10"}, expect=200)
    call("POST", "/replay", {"synthetic": {"seed": 6, "patients": 5}, "format": "csv"}, expect=200)
    call("POST", "/replay", {"synthetic": "seed=6,patients=5", "format": "table"}, expect=200)
    call("POST", "/replay", {"dataset": cohort}, expect=200)
    call("POST", "/replay", {"format": "xml"}, expect=400)
    _, export = call("GET", "/export", expect=200)

    # Offline artifacts share the same definitions.
    offline = [("StoreExport", export), ("Dataset", cohort)]
    shipped = subprocess.check_output(
        [IVF, "--rules", os.path.join(SOURCE_DIR, "config", "rules.default.json"), "rules", "--hash"]).decode().strip()
    if shipped != health["config_hash"]:
        failures.append(f"config/rules.default.json hashes to {shipped}, server reports {health['config_hash']}")
    report_path = os.path.join(tmp, "ingest.json")
    subprocess.run([IVF, "ingest", "--input", os.path.join(SOURCE_DIR, "data", "sample_export.csv"),
                    "--mapping", os.path.join(SOURCE_DIR, "config", "mapping.example.json"),
                    "--out", os.path.join(tmp, "sample.json"), "--report", report_path],
                   stderr=subprocess.DEVNULL)
    with open(report_path) as f:
        offline.append(("IngestReport", json.load(f)))
    with open(os.path.join(tmp, "sample.json")) as f:
        offline.append(("Dataset", json.load(f)))
    global checked
    for defname, doc in offline:
        checked += 1
        for e in list(validator_for(defname).iter_errors(doc))[:3]:
            failures.append(f"offline {defname} {list(e.absolute_path)}: {e.message}")


if __name__ == "__main__":
    sys.exit(main())
