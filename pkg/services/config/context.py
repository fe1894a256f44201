import json
import os
from hashlib import sha256
from typing import Optional

from services.config.scenario import Scenario


class RunContext:
    """Context for one CLI command run against one scenario."""

    def __init__(self, scenario: Scenario, command: str, output_dir: Optional[str] = None):
        self.scenario: Scenario = scenario
        self.command: str = command
        self.output_dir: str = output_dir or scenario.output.dir
        self.scenario_hash: str = self.get_scenario_hash()

    def get_scenario_hash(self) -> str:
        """Short hash of the scenario's canonical JSON."""
        canonical = json.dumps(self.scenario.raw, sort_keys=True, separators=(",", ":"))
        return sha256(canonical.encode()).hexdigest()[:16]

    def get_output_file(self, name: str) -> str:
        return os.path.join(self.output_dir, name)
