"""Regenerates the golden prompts from the template file with PyYAML.

Run from this directory: python3 generate.py
"""
import json
import pathlib

import yaml

HERE = pathlib.Path(__file__).parent
TEMPLATES = HERE / "../../../core/templates/prompts.yaml"

store = yaml.safe_load(TEMPLATES.read_text())
bindings = json.loads((HERE / "bindings.json").read_text())
for key, template in store.items():
    user = template["user"]
    for name, value in bindings[key].items():
        user = user.replace("{{" + name + "}}", value)
    (HERE / f"{key}.system.txt").write_text(template["system"])
    (HERE / f"{key}.user.txt").write_text(user)
