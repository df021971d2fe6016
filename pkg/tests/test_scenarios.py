from pathlib import Path

import pytest

from chainpass.errors import ConfigError
from chainpass.scenarios import (BUILTINS, Catalog, Scenario, list_scenarios, parse_scenario,
                                 run_scenario)

FIXTURE = Path(__file__).parent / "fixtures" / "scenario_spoof.ini"
BUILTIN_NAMES = ["honest_multi_server", "replay", "sms_spoof", "phishing_mitm",
                 "keylogger_kiosk", "password_reuse", "phone_loss_recovery", "chain_exhaustion"]


def test_catalog_contents():
    assert list_scenarios() == BUILTIN_NAMES
    catalog = Catalog()
    catalog.load_file(FIXTURE)
    assert len(catalog) == 9
    with pytest.raises(ConfigError):
        catalog.load_file(FIXTURE)
    with pytest.raises(ConfigError):
        catalog.get("nosuch")
    assert len(Catalog(include_builtins=False)) == 0


@pytest.mark.parametrize("scenario", [s for s in BUILTINS if s.name != "password_reuse"],
                         ids=lambda s: s.name)
def test_builtins_pass_at_other_seeds(scenario):
    for seed in (1, 2024):
        verdict = run_scenario(scenario, seed=seed)
        assert verdict.passed, verdict.evidence
        assert verdict.line().startswith(f"verdict {scenario.name} PASS seed={seed}")


def test_file_scenario_runs():
    scenario = Catalog(include_builtins=False).load_file(FIXTURE)
    verdict = run_scenario(scenario, seed=3)
    assert verdict.passed, verdict.evidence
    outcomes = [e.outcome for e in verdict.transcript.events if e.kind == "LoginSms"]
    assert outcomes == ["rejected:spoofed-source origin=adversary", "accepted session=kiosk"]
    assert verdict.world.server("bank.example").accounts["alice"].next_index == 1


def test_failing_verdict_cites_transcript_line():
    text = FIXTURE.read_text().replace("attack_rejected:spoofed-source", "all_logins_succeed")
    verdict = run_scenario(parse_scenario(text), seed=3)
    assert not verdict.passed
    assert any(line.startswith("unexpected rejection line ") and "spoofed-source" in line
               for line in verdict.evidence)
    assert " FAIL seed=3 " in verdict.line()


def test_wrong_expected_kind_fails():
    text = FIXTURE.read_text().replace("spoofed-source", "nonce-mismatch")
    verdict = run_scenario(parse_scenario(text))
    assert not verdict.passed
    assert "no rejected:nonce-mismatch outcome in transcript" in verdict.evidence


BAD_FILES = {
    "no_head": "[steps]\n1 = register a b\n",
    "no_name": "[scenario]\nexpectation = attacker_never_authenticates\n",
    "bad_expectation": "[scenario]\nname = x\nexpectation = maybe\n",
    "bare_rejected": "[scenario]\nname = x\nexpectation = attack_rejected\n",
    "short_chain": "[scenario]\nname = x\nchain_length = 1\n",
    "text_chain": "[scenario]\nname = x\nchain_length = many\n",
    "unknown_section": "[scenario]\nname = x\n[weather]\n",
    "server_no_number": "[scenario]\nname = x\n[server s]\n",
    "user_no_password": "[scenario]\nname = x\n[user u]\nnumber = 15551230001\n",
    "bad_verb": "[scenario]\nname = x\n[user u]\npassword = p\nnumber = 15551230001\n"
                "[steps]\n1 = dance u\n",
    "unknown_user": "[scenario]\nname = x\n[server s]\nnumber = 15550000001\n"
                    "[steps]\n1 = register u s\n",
    "unknown_tap": "[scenario]\nname = x\n[steps]\n1 = tap t\n",
    "bad_step_key": "[scenario]\nname = x\n[steps]\nfirst = tap t\n",
    "bad_channel": "[scenario]\nname = x\n[tap t]\nchannel = carrier_pigeon\n",
    "bad_action": "[scenario]\nname = x\n[tap t]\naction = teleport\n",
    "bad_edit": "[scenario]\nname = x\n[tap t]\naction = modify\nedits = 3:zz\n",
    "bad_hex": "[scenario]\nname = x\n[tap t]\naction = inject\nframe = nothex\n",
    "syntax": "[scenario\nname = x\n",
    "name_space": "[scenario]\nname = two words\n",
}


@pytest.mark.parametrize("name", BAD_FILES)
def test_config_errors(name):
    with pytest.raises(ConfigError):
        parse_scenario(BAD_FILES[name])


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        Catalog().load_file(tmp_path / "missing.ini")


def test_scenario_validation():
    with pytest.raises(ConfigError):
        Scenario("ok", "", "attack_rejected", lambda w: [])
