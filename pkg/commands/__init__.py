import argparse
import importlib
from pathlib import Path

from ._utils import logger

DEFAULT_LOAD_PRIORITY = 10


def list_available_commands() -> list[str]:
    commands = []
    this_path = Path(__file__).parent
    for child in this_path.iterdir():
        if child.name.startswith("_") or child.suffix != ".py":
            continue
        commands.append(child.stem)
    return sorted(commands)


def load_commands(subparsers) -> dict[str, argparse.ArgumentParser]:
    """Import every command module and let it add its subparser."""
    modules_with_priority = []
    for name in list_available_commands():
        module = importlib.import_module(f".{name}", __package__)
        load_priority = getattr(module, "load_priority", DEFAULT_LOAD_PRIORITY)
        modules_with_priority.append((module, name, load_priority))

    modules_with_priority.sort(key=lambda x: x[-1])
    parsers: dict[str, argparse.ArgumentParser] = {}
    for module, name, priority in modules_with_priority:
        if hasattr(module, "register"):
            logger.debug(f"Loading {name} command with priority {priority}.")
            parser = module.register(subparsers)
            parsers[parser.prog.split()[-1]] = parser
    return parsers
