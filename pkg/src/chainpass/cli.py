"""``chainpass`` command line.

Exit codes: 0 expectation met, 1 expectation violated, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ChainPassError
from .scenarios import (
    ALICE, BANK, DEFAULT_CHAIN_LENGTH, DEFAULT_SEED, SERVER_NUMBERS, Catalog, World, run_scenario,
)
from .server import load_store

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


def _chain_length(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("chain length must be >= 2")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED,
                        help="seed for every random choice (default %(default)s)")
    common.add_argument("--chain-length", "-N", type=_chain_length, default=DEFAULT_CHAIN_LENGTH,
                        help="hash-chain length N (default %(default)s, min 2)")
    common.add_argument("--log-level", choices=("quiet", "info", "trace"), default="info")

    parser = argparse.ArgumentParser(prog="chainpass",
                                     description="SMS hash-chain OTP protocol simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a built-in or file scenario")
    run.add_argument("scenario", help="built-in name or path to a scenario file")
    run.add_argument("--weak-constant-nonce", action="store_true",
                     help="negative control: servers issue a constant login nonce")

    demo = sub.add_parser("demo", parents=[common],
                          help="registration, one login and a phone-loss recovery")
    demo.add_argument("--store", type=Path, help="write the server's account store here")

    listing = sub.add_parser("list-scenarios", help="print the scenario catalog")
    listing.add_argument("--scenario-file", action="append", default=[], type=Path)

    store = sub.add_parser("store", help="inspect a persisted server store")
    store_sub = store.add_subparsers(dest="store_command", required=True)
    dump = store_sub.add_parser("dump", help="print the records of a store file")
    dump.add_argument("path", type=Path)
    return parser


def _print_transcript(transcript, level: str) -> None:
    if level != "quiet":
        sys.stdout.write(transcript.text())


def cmd_run(args) -> int:
    catalog = Catalog()
    if Path(args.scenario).is_file():
        scenario = catalog.load_file(args.scenario)
    else:
        scenario = catalog.get(args.scenario)
    verdict = run_scenario(scenario, seed=args.seed, chain_length=args.chain_length,
                           constant_nonce=args.weak_constant_nonce)
    _print_transcript(verdict.transcript, args.log_level)
    print(verdict.line())
    if args.log_level == "trace" or not verdict.passed:
        for line in verdict.evidence[1:]:
            print(f"  {line}")
    return EXIT_OK if verdict.passed else EXIT_FAILED


def cmd_demo(args) -> int:
    world = World(args.seed, args.chain_length, label=f"chain_length={args.chain_length} demo")
    world.add_server(BANK, SERVER_NUMBERS[BANK])
    world.add_user(ALICE, b"correct horse battery", "15551230001")
    quiet = args.log_level == "quiet"
    shown = 0

    def phase(title: str) -> None:
        nonlocal shown
        if quiet:
            return
        if shown == 0:
            print(world.net.transcript.header())
        print(f"## {title}")
        for line in world.net.transcript.lines()[shown:]:
            print(line)
        shown = len(world.net.transcript.events)

    world.register(ALICE, BANK)
    phase("registration")
    logged_in = world.login(ALICE, BANK)
    phase("login")
    world.lose_phone(ALICE)
    world.recover(ALICE, BANK)
    phase("recovery")
    account = world.server(BANK).accounts[ALICE]
    ok = logged_in and account.status.value == "active" and not world.rejections()
    if args.store:
        world.server(BANK).persist(args.store)
    print(f"verdict demo {'PASS' if ok else 'FAIL'} seed={args.seed} "
          f"next_index={account.next_index}")
    return EXIT_OK if ok else EXIT_FAILED


def cmd_list(args) -> int:
    catalog = Catalog()
    for path in args.scenario_file:
        catalog.load_file(path)
    for scenario in catalog:
        print(f"{scenario.name}\t{scenario.expectation}\t{scenario.description}")
    return EXIT_OK


def cmd_store_dump(args) -> int:
    accounts = load_store(args.path)
    print(f"{len(accounts)} account(s) in {args.path}")
    for r in accounts.values():
        print(f"{r.user_id}\tphone={r.user_phone}\tstatus={r.status.value}\t"
              f"index={r.next_index}/{r.chain_length}\tseed={r.seed.hex()}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "demo": cmd_demo, "list-scenarios": cmd_list}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    handler = cmd_store_dump if args.command == "store" else COMMANDS[args.command]
    try:
        return handler(args)
    except ChainPassError as exc:
        print(f"chainpass: {exc.kind}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
