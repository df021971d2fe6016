import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chainpass import crypto, wire
from chainpass.errors import (
    AlreadyRegistered, AuthenticationFailure, CorruptStore, CredentialMismatch, NoChallenge,
    NonceMismatch, ProtocolOrderViolation, RecoveryRequired, SpoofedSource, StaleRegistration,
    StoreIOError, UnknownAccount,
)
from chainpass.phone import PhoneAgent
from chainpass.server import AccountRecord, ServerAgent, Status, dump_store, load_store, parse_store

from conftest import BANK_PHONE, PASSWORD, USER_PHONE, Trio

STORE_FIXTURE = Path(__file__).parent / "fixtures" / "store_v1.txt"


def forward(user="alice", key=b"\x11" * 16):
    return wire.TspRegistrationForward(user, USER_PHONE, key)


def test_tsp_registration_creates_pending_record(rng):
    server = ServerAgent("bank.example", BANK_PHONE)
    response = server.handle_tsp_registration(forward(), rng)
    assert response.server_id == "bank.example" and response.server_phone == BANK_PHONE
    assert len(response.seed) == 16 and response.session_key == b"\x11" * 16
    record = server.accounts["alice"]
    assert record.status is Status.PENDING and record.secret == b"\x11" * 16


def test_two_users_get_distinct_seeds():
    server = ServerAgent("bank.example", BANK_PHONE)
    r = random.Random(99)
    a = server.handle_tsp_registration(forward("alice"), r)
    b = server.handle_tsp_registration(forward("bob"), r)
    oracle = random.Random(99)
    assert (a.seed, b.seed) == (oracle.randbytes(16), oracle.randbytes(16))
    assert a.seed != b.seed


def test_registration_of_active_user_refused(trio):
    trio.register()
    with pytest.raises(AlreadyRegistered):
        trio.server.handle_tsp_registration(forward(), trio.rng)


def test_registration_stores_phone_credential(trio):
    trio.register()
    record = trio.server.accounts["alice"]
    assert record.status is Status.ACTIVE and record.next_index == 0
    assert record.secret == crypto.derive_credential(PASSWORD, "bank.example", record.seed)


def _pending(trio):
    request = trio.phone.begin_registration("alice", "bank.example")
    fwd = trio.tsp.forward_registration(request, "sim-1", trio.rng)
    response = trio.server.handle_tsp_registration(fwd, trio.rng)
    return response, trio.phone.complete_registration(response, PASSWORD, trio.rng)


def test_registration_sms_spoofed_sender(trio):
    _, sms = _pending(trio)
    before = trio.server.state_fingerprint()
    with pytest.raises(SpoofedSource):
        trio.server.handle_registration_sms(sms, "15559990000")
    assert trio.server.state_fingerprint() == before
    assert trio.server.accounts["alice"].status is Status.PENDING


def test_registration_sms_wrong_key(trio):
    response, _ = _pending(trio)
    credential = crypto.derive_credential(PASSWORD, "bank.example", response.seed)
    forged = crypto.seal(b"\x00" * 16, "alice", crypto.lp_concat(credential, response.seed), trio.rng)
    with pytest.raises(AuthenticationFailure):
        trio.server.handle_registration_sms(wire.RegistrationSms("alice", forged), USER_PHONE)


def test_registration_sms_stale_seed(trio):
    response, _ = _pending(trio)
    stale = crypto.seal(response.session_key, "alice",
                        crypto.lp_concat(bytes(32), bytes(16)), trio.rng)
    with pytest.raises(StaleRegistration):
        trio.server.handle_registration_sms(wire.RegistrationSms("alice", stale), USER_PHONE)


def test_registration_sms_for_active_account(trio):
    sms = trio.register()
    with pytest.raises(ProtocolOrderViolation):
        trio.server.handle_registration_sms(sms, USER_PHONE)


def test_challenge_requires_active_account(trio):
    with pytest.raises(UnknownAccount):
        trio.server.issue_challenge(wire.LoginRequest("alice"), trio.rng)
    _pending(trio)
    with pytest.raises(UnknownAccount):
        trio.server.issue_challenge(wire.LoginRequest("alice"), trio.rng)


def test_newest_challenge_wins(trio):
    trio.register()
    first = trio.server.issue_challenge(wire.LoginRequest("alice"), trio.rng)
    sms = trio.phone.build_login_sms(first, PASSWORD, trio.rng)
    second = trio.server.issue_challenge(wire.LoginRequest("alice"), trio.rng)
    assert len(second.server_nonce) == 16 and second.server_nonce != first.server_nonce
    with pytest.raises(NonceMismatch):
        trio.server.verify_login_sms(sms, USER_PHONE)
    assert trio.server.accounts["alice"].next_index == 0


def test_challenge_at_chain_end_requires_recovery(rng):
    t = Trio(rng, chain_length=2)
    t.register()
    t.login()
    t.login()
    with pytest.raises(RecoveryRequired):
        t.server.issue_challenge(wire.LoginRequest("alice"), rng)


def test_replay_of_accepted_login(trio):
    trio.register()
    challenge = trio.server.issue_challenge(wire.LoginRequest("alice"), trio.rng)
    sms = trio.phone.build_login_sms(challenge, PASSWORD, trio.rng)
    trio.server.verify_login_sms(sms, USER_PHONE)
    with pytest.raises(NoChallenge):
        trio.server.verify_login_sms(sms, USER_PHONE)
    # even with a fresh challenge the old SMS is keyed to a spent OTP
    trio.server.issue_challenge(wire.LoginRequest("alice"), trio.rng)
    with pytest.raises(AuthenticationFailure):
        trio.server.verify_login_sms(sms, USER_PHONE)
    assert trio.server.accounts["alice"].next_index == 1


def test_stale_index_login(trio):
    trio.register()
    trio.login()
    challenge = trio.server.issue_challenge(wire.LoginRequest("alice"), trio.rng)
    record = trio.phone.records["bank.example"]
    record.next_index -= 1
    sms = trio.phone.build_login_sms(challenge, PASSWORD, trio.rng)
    with pytest.raises(AuthenticationFailure):
        trio.server.verify_login_sms(sms, USER_PHONE)


def test_login_sms_spoofed_sender(trio):
    trio.register()
    challenge = trio.server.issue_challenge(wire.LoginRequest("alice"), trio.rng)
    sms = trio.phone.build_login_sms(challenge, PASSWORD, trio.rng)
    before = trio.server.state_fingerprint()
    with pytest.raises(SpoofedSource):
        trio.server.verify_login_sms(sms, "15559990000")
    assert trio.server.state_fingerprint() == before


def test_challenge_expiry(trio):
    trio.register()
    challenge = trio.server.issue_challenge(wire.LoginRequest("alice"), trio.rng, now=0)
    sms = trio.phone.build_login_sms(challenge, PASSWORD, trio.rng)
    with pytest.raises(NoChallenge):
        trio.server.verify_login_sms(sms, USER_PHONE, now=101)
    trio.server.verify_login_sms(sms, USER_PHONE, now=100)


def test_success_digest_matches_phone_expectation(trio):
    trio.register()
    challenge = trio.server.issue_challenge(wire.LoginRequest("alice"), trio.rng)
    sms = trio.phone.build_login_sms(challenge, PASSWORD, trio.rng)
    pending = trio.phone.pending_login
    success = trio.server.verify_login_sms(sms, USER_PHONE)
    assert success.digest == crypto.success_digest(pending.device_nonce, pending.otp)


def test_recovery_echoes_state_mid_chain(trio):
    trio.register()
    trio.login()
    trio.login()
    request = wire.TspRecoveryForward("alice", USER_PHONE)
    response = trio.server.handle_tsp_recovery(request, trio.rng)
    record = trio.server.accounts["alice"]
    assert (response.seed, response.index) == (record.seed, 2)
    assert record.status is Status.RECOVERING
    with pytest.raises(RecoveryRequired):
        trio.server.issue_challenge(wire.LoginRequest("alice"), trio.rng)


def test_recovery_unknown_user(trio):
    with pytest.raises(UnknownAccount):
        trio.server.handle_tsp_recovery(wire.TspRecoveryForward("zed", USER_PHONE), trio.rng)


def test_recovery_from_other_number(trio):
    trio.register()
    with pytest.raises(SpoofedSource):
        trio.server.handle_tsp_recovery(wire.TspRecoveryForward("alice", "15550001111"), trio.rng)


def test_reseed_at_n_minus_one(rng):
    t = Trio(rng, chain_length=4)
    t.register()
    for _ in range(3):
        t.login()
    old_seed = t.server.accounts["alice"].seed
    response = t.server.handle_tsp_recovery(wire.TspRecoveryForward("alice", USER_PHONE), rng)
    assert response.index == 0 and response.seed != old_seed


def test_recovery_then_login_uses_i_plus_two(trio):
    trio.register()
    for _ in range(3):
        trio.login()
    trio.recover(phone=PhoneAgent(10))
    record = trio.server.accounts["alice"]
    assert record.status is Status.ACTIVE and record.next_index == 4


def test_recovery_sms_replay_and_sender(trio):
    trio.register()
    trio.login()
    phone = PhoneAgent(10)
    phone.begin_recovery("alice", "bank.example")
    response = trio.server.handle_tsp_recovery(wire.TspRecoveryForward("alice", USER_PHONE), trio.rng)
    sms = phone.complete_recovery(response, PASSWORD, trio.rng)
    with pytest.raises(SpoofedSource):
        trio.server.verify_recovery_sms(sms, "15559990000")
    trio.server.verify_recovery_sms(sms, USER_PHONE)
    with pytest.raises(NoChallenge):
        trio.server.verify_recovery_sms(sms, USER_PHONE)


def test_recovery_with_other_credential(trio):
    trio.register()
    trio.login()
    response = trio.server.handle_tsp_recovery(wire.TspRecoveryForward("alice", USER_PHONE), trio.rng)
    # right OTP key, wrong credential inside: only possible for someone holding the chain
    key = crypto.otp_at_index(trio.server.accounts["alice"].secret, 10, response.index).key
    env = crypto.seal(key, "alice", crypto.lp_concat(bytes(32), response.server_nonce), trio.rng)
    with pytest.raises(CredentialMismatch):
        trio.server.verify_recovery_sms(wire.RecoverySms("alice", env), USER_PHONE)


def test_server_never_persists_otps(trio):
    trio.register()
    for _ in range(3):
        trio.login()
    record = trio.server.accounts["alice"]
    text = trio.server.store_text()
    for i in range(record.chain_length):
        otp = crypto.otp_at_index(record.secret, record.chain_length, i)
        assert otp.digest.hex() not in text


# --- store -----------------------------------------------------------------

def test_store_fixture_round_trip(tmp_path):
    accounts = load_store(STORE_FIXTURE)
    assert list(accounts) == ["alice", "bob", "carol"]
    assert accounts["bob"].status is Status.PENDING and len(accounts["bob"].secret) == 16
    assert accounts["carol"].next_index == 99
    assert dump_store(accounts.values()) == STORE_FIXTURE.read_text()


def test_persist_load(trio, tmp_path):
    trio.register()
    trio.login()
    path = tmp_path / "bank.store"
    trio.server.persist(path)
    other = ServerAgent("bank.example", BANK_PHONE, 10)
    other.load(path)
    assert other.accounts == trio.server.accounts
    assert path.read_text().startswith("chainpass-store v1\n")


def test_empty_store(tmp_path):
    path = tmp_path / "empty.store"
    ServerAgent("bank.example", BANK_PHONE).persist(path)
    assert path.read_text() == "chainpass-store v1\n"
    assert load_store(path) == {}


@pytest.mark.parametrize("cut", [1, 10, 30, -1, -5])
def test_truncated_store(tmp_path, cut):
    text = STORE_FIXTURE.read_text()
    path = tmp_path / "t.store"
    path.write_text(text[:cut])
    with pytest.raises(CorruptStore):
        load_store(path)


@pytest.mark.parametrize("mutate", [
    lambda s: s.replace("active", "bogus"),
    lambda s: s.replace("\t3\t", "\tx\t"),
    lambda s: s.replace("\t3\t", "\t101\t"),
    lambda s: s.replace("chainpass-store v1", "chainpass-store v2"),
    lambda s: s.replace("15551230001", "1555"),
    lambda s: s + "\n",
    lambda s: s.replace("29b39e7f", "29b39e7"),
])
def test_malformed_store(mutate):
    with pytest.raises(CorruptStore):
        parse_store(mutate(STORE_FIXTURE.read_text()))


def test_missing_store(tmp_path):
    with pytest.raises(StoreIOError):
        load_store(tmp_path / "nope")


records = st.builds(
    AccountRecord,
    st.text(alphabet=st.characters(blacklist_characters="\t\n\r", blacklist_categories=("Cs",)),
            min_size=1, max_size=12),
    st.from_regex(r"[0-9]{6,15}", fullmatch=True),
    st.binary(min_size=32, max_size=32),
    st.binary(min_size=16, max_size=16),
    st.integers(0, 50), st.just(50),
    st.sampled_from([Status.ACTIVE, Status.RECOVERING]))


@settings(max_examples=200, deadline=None)
@given(st.lists(records, max_size=8, unique_by=lambda r: r.user_id))
def test_store_round_trip_property(accounts):
    text = dump_store(accounts)
    parsed = parse_store(text)
    assert list(parsed.values()) == accounts
    assert dump_store(parsed.values()) == text
