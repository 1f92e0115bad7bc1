"""
Config Template Manager for Kettlewatch
Lists and loads the bundled example experiment configs.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from config_loader import ConfigError


class TemplateManager:
    """Manages the bundled experiment configs in templates/*.json."""

    def __init__(self, templates_dir: str = "templates"):
        """Initialize template manager."""
        self.templates_dir = Path(templates_dir)
        self.templates = self._load_templates()

    def _load_templates(self) -> Dict[str, Dict]:
        """Load every bundled config, keyed by file stem."""
        templates = {}
        if not self.templates_dir.is_dir():
            return templates
        for path in sorted(self.templates_dir.glob("*.json")):
            with open(path, 'r', encoding='utf-8') as f:
                templates[path.stem] = {"path": path, "text": f.read()}
        return templates

    def list_templates(self) -> List[Dict]:
        """List all available templates."""
        listed = []
        for key, value in self.templates.items():
            try:
                doc = json.loads(value["text"])
            except json.JSONDecodeError:
                doc = {}
            listed.append({
                "id": key,
                "name": doc.get("name", key),
                "description": doc.get("description", ""),
                "dim": doc.get("dim"),
            })
        return listed

    def get_template(self, template_id: str) -> Optional[str]:
        """Get the JSON text of a bundled config."""
        template = self.templates.get(template_id)
        return template["text"] if template else None

    def resolve(self, config: str) -> Tuple[str, str]:
        """
        Read --config as a file path, falling back to a bundled config name.

        Args:
            config: Path to a JSON file or a template id (with or without .json)

        Returns:
            Tuple[str, str]: (JSON text, source description)

        Raises:
            ConfigError: When neither a file nor a bundled config matches
        """
        path = Path(config)
        if path.is_file():
            return path.read_text(encoding='utf-8'), str(path)
        stem = path.name[:-5] if path.name.endswith(".json") else path.name
        text = self.get_template(stem)
        if text is None:
            known = ", ".join(self.templates) or "none"
            raise ConfigError(f"config {config!r} is neither a file nor a bundled config (bundled: {known})", "")
        return text, f"bundled:{stem}"
