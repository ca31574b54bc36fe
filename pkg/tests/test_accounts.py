import pytest

from crowdship.auth import ActionTokenError
from crowdship.errors import Conflict, Forbidden, Unauthenticated, ValidationFailed

from conftest import make_services


@pytest.fixture
def svc():
    services = make_services(auto_activate_accounts=False)
    yield services
    services.store.close()


@pytest.fixture
def active_svc():
    services = make_services(auto_activate_accounts=True)
    yield services
    services.store.close()


def token_from_link(link: str) -> str:
    return link.split("token=")[1]


class TestRegistration:
    def test_register_creates_inactive_account_and_person(self, svc):
        profile = svc.accounts.register("alice@x.org", "password123", "Alice", "Adams", "+421900111222")
        assert profile["is_active"] is False
        assert profile["first_name"] == "Alice"
        assert profile["email"] == "alice@x.org"
        entries = svc.store.list("outbox", kind="verify_email")
        assert len(entries) == 1
        assert svc.outbox.decode(entries[0])["recipient"] == "alice@x.org"

    def test_duplicate_email_conflict(self, svc):
        svc.accounts.register("alice@x.org", "password123", "Alice", "A")
        with pytest.raises(Conflict):
            svc.accounts.register("Alice@X.org", "password123", "Other", "O")

    def test_bad_inputs(self, svc):
        with pytest.raises(ValidationFailed) as exc:
            svc.accounts.register("not-an-email", "short", "", "L")
        assert {"email", "password", "first_name"} <= set(exc.value.fields)

    def test_email_stored_encrypted(self, svc):
        svc.accounts.register("alice@x.org", "password123", "Alice", "A")
        (account,) = svc.store.list("accounts")
        assert "alice@x.org" not in str(account)
        assert svc.cipher.decrypt_str(account["email_enc"]) == "alice@x.org"


class TestVerification:
    def test_verify_flow_activates(self, svc):
        profile = svc.accounts.register("bob@x.org", "password123", "Bob", "B")
        with pytest.raises(Forbidden):  # not active yet
            svc.accounts.login("bob@x.org", "password123")
        (entry,) = svc.store.list("outbox", kind="verify_email")
        token = token_from_link(svc.outbox.decode(entry)["payload"]["link"])
        svc.accounts.verify_email(token)
        assert svc.accounts.get(profile["account_id"])["is_active"] is True
        svc.accounts.login("bob@x.org", "password123")  # now works
        with pytest.raises(ActionTokenError):
            svc.accounts.verify_email(token)  # single use

    def test_resend_only_for_inactive_accounts(self, svc):
        svc.accounts.register("bob@x.org", "password123", "Bob", "B")
        svc.accounts.resend_verification("bob@x.org")
        assert len(svc.store.list("outbox", kind="verify_email")) == 2
        svc.accounts.resend_verification("stranger@x.org")  # silent no-op
        assert len(svc.store.list("outbox", kind="verify_email")) == 2


class TestLogin:
    def test_wrong_password(self, active_svc):
        active_svc.accounts.register("c@x.org", "password123", "C", "C")
        with pytest.raises(Unauthenticated) as exc:
            active_svc.accounts.login("c@x.org", "wrong-password")
        assert exc.value.code == "invalid_credentials"

    def test_unknown_email(self, active_svc):
        with pytest.raises(Unauthenticated):
            active_svc.accounts.login("ghost@x.org", "password123")

    def test_login_is_case_insensitive_on_email(self, active_svc):
        active_svc.accounts.register("c@x.org", "password123", "C", "C")
        pair = active_svc.accounts.login("C@X.ORG", "password123")
        assert pair.access_token


class TestPasswordReset:
    def test_reset_flow_old_fails_new_works(self, active_svc):
        svc = active_svc
        svc.accounts.register("d@x.org", "oldpassword1", "D", "D")
        svc.accounts.request_password_reset("d@x.org")
        (entry,) = svc.store.list("outbox", kind="reset_password")
        token = token_from_link(svc.outbox.decode(entry)["payload"]["link"])
        svc.accounts.confirm_password_reset(token, "newpassword2")
        with pytest.raises(Unauthenticated):
            svc.accounts.login("d@x.org", "oldpassword1")
        svc.accounts.login("d@x.org", "newpassword2")

    def test_reset_token_single_use(self, active_svc):
        svc = active_svc
        svc.accounts.register("d@x.org", "oldpassword1", "D", "D")
        svc.accounts.request_password_reset("d@x.org")
        (entry,) = svc.store.list("outbox", kind="reset_password")
        token = token_from_link(svc.outbox.decode(entry)["payload"]["link"])
        svc.accounts.confirm_password_reset(token, "newpassword2")
        with pytest.raises(Forbidden):
            svc.accounts.confirm_password_reset(token, "thirdpassword3")

    def test_unknown_email_is_silent(self, active_svc):
        active_svc.accounts.request_password_reset("ghost@x.org")
        assert active_svc.store.list("outbox") == []


class TestProfile:
    def test_update_profile_fields(self, active_svc):
        svc = active_svc
        p = svc.accounts.register("e@x.org", "password123", "Eva", "E")
        out = svc.accounts.update_profile(p["account_id"], {"first_name": "Evelina", "phone": "+421"})
        assert out["first_name"] == "Evelina"
        assert out["phone"] == "+421"

    def test_update_password_via_profile(self, active_svc):
        svc = active_svc
        p = svc.accounts.register("e@x.org", "password123", "Eva", "E")
        svc.accounts.update_profile(p["account_id"], {"password": "fresh-password-9"})
        with pytest.raises(Unauthenticated):
            svc.accounts.login("e@x.org", "password123")
        svc.accounts.login("e@x.org", "fresh-password-9")

    def test_email_not_changeable(self, active_svc):
        svc = active_svc
        p = svc.accounts.register("e@x.org", "password123", "Eva", "E")
        with pytest.raises(ValidationFailed):
            svc.accounts.update_profile(p["account_id"], {"email": "new@x.org"})


class TestCourierRole:
    def test_register_courier_flips_role(self, active_svc):
        svc = active_svc
        p = svc.accounts.register("f@x.org", "password123", "Fero", "F")
        courier = svc.accounts.register_courier(p["account_id"], "medium")
        assert courier["vehicle_class"] == "medium"
        assert courier["is_available"] is True
        assert svc.accounts.get(p["account_id"])["role"] == "courier"

    def test_double_registration_conflict(self, active_svc):
        svc = active_svc
        p = svc.accounts.register("f@x.org", "password123", "Fero", "F")
        svc.accounts.register_courier(p["account_id"], "small")
        with pytest.raises(Conflict):
            svc.accounts.register_courier(p["account_id"], "large")

    def test_bad_vehicle_class(self, active_svc):
        svc = active_svc
        p = svc.accounts.register("f@x.org", "password123", "Fero", "F")
        with pytest.raises(ValidationFailed):
            svc.accounts.register_courier(p["account_id"], "tank")

    def test_availability_toggle(self, active_svc):
        svc = active_svc
        p = svc.accounts.register("f@x.org", "password123", "Fero", "F")
        svc.accounts.register_courier(p["account_id"], "small")
        courier = svc.accounts.set_courier_availability(p["account_id"], False)
        assert courier["is_available"] is False

    def test_availability_requires_courier_profile(self, active_svc):
        svc = active_svc
        p = svc.accounts.register("g@x.org", "password123", "G", "G")
        with pytest.raises(Forbidden):
            svc.accounts.set_courier_availability(p["account_id"], True)


class TestReceiverLinking:
    def test_unlinked_person_adopted_on_registration(self, active_svc):
        svc = active_svc
        # A delivery earlier created an unregistered receiver person.
        person_id = svc.store.put(
            "persons",
            {
                "first_name_enc": svc.cipher.encrypt_str("Rado"),
                "last_name_enc": svc.cipher.encrypt_str("Receiver"),
                "email_enc": svc.cipher.encrypt_str("rado@x.org"),
                "email_bidx": svc.cipher.blind_index("rado@x.org"),
                "phone_enc": None,
                "account_id": None,
            },
        )
        profile = svc.accounts.register("rado@x.org", "password123", "Rado", "R")
        person = svc.store.get("persons", person_id)
        assert person["account_id"] == profile["account_id"]
