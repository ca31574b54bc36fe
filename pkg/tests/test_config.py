import pytest

from crowdship.config import AppConfig


class TestLoad:
    def test_defaults(self):
        config = AppConfig.load(env={})
        assert config.port == 8000
        assert config.auto_activate_accounts is False

    def test_file_values(self, tmp_path):
        path = tmp_path / "crowdship.yaml"
        path.write_text("port: 9100\ndb_path: /tmp/x.db\nargon2_time_cost: 2\n")
        config = AppConfig.load(str(path), env={})
        assert config.port == 9100
        assert config.db_path == "/tmp/x.db"
        assert config.argon2_time_cost == 2

    def test_env_overrides_file(self, tmp_path):
        path = tmp_path / "crowdship.yaml"
        path.write_text("port: 9100\n")
        config = AppConfig.load(
            str(path),
            env={"CROWDSHIP_PORT": "9200", "CROWDSHIP_AUTO_ACTIVATE_ACCOUNTS": "true",
                 "CROWDSHIP_STALENESS_SECONDS": "90.5", "CROWDSHIP_SIGNING_KEY": "sekrit"},
        )
        assert config.port == 9200
        assert config.auto_activate_accounts is True
        assert config.staleness_seconds == 90.5
        assert config.signing_key == "sekrit"

    def test_bool_coercion_variants(self):
        for raw, expected in (("1", True), ("yes", True), ("on", True),
                              ("0", False), ("false", False), ("no", False)):
            config = AppConfig.load(env={"CROWDSHIP_AUTO_ACTIVATE_ACCOUNTS": raw})
            assert config.auto_activate_accounts is expected, raw

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("prot: 9100\n")
        with pytest.raises(ValueError, match="unknown config keys"):
            AppConfig.load(str(path), env={})

    def test_non_mapping_file_rejected(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("- just\n- a list\n")
        with pytest.raises(ValueError):
            AppConfig.load(str(path), env={})


class TestStoreCli:
    def test_dump_load_round_trip(self, tmp_path, capsys):
        from crowdship import cli
        from crowdship.store import SqliteStore

        src = tmp_path / "src.db"
        store = SqliteStore(str(src))
        store.put("accounts", {"role": "user"}, entity_id="a1")
        store.close()

        dump_file = tmp_path / "dump.jsonl"
        assert cli.main(["store", "dump", "--db", str(src), "--out", str(dump_file)]) == 0
        assert "dumped 1 records" in capsys.readouterr().err

        dst = tmp_path / "dst.db"
        assert cli.main(["store", "load", "--db", str(dst), "--infile", str(dump_file)]) == 0
        loaded = SqliteStore(str(dst))
        assert loaded.get("accounts", "a1")["role"] == "user"
        loaded.close()

    def test_dump_keeps_encrypted_fields_opaque(self, tmp_path, capsys):
        from crowdship import cli
        from crowdship.fieldcrypto import FieldCipher
        from crowdship.store import SqliteStore

        cipher = FieldCipher("dump-test-key")
        src = tmp_path / "src.db"
        store = SqliteStore(str(src))
        store.put(
            "persons",
            {
                "first_name_enc": cipher.encrypt_str("Milena"),
                "email_enc": cipher.encrypt_str("milena@x.org"),
                "email_bidx": cipher.blind_index("milena@x.org"),
                "account_id": None,
            },
        )
        store.close()
        out = tmp_path / "dump.jsonl"
        assert cli.main(["store", "dump", "--db", str(src), "--out", str(out)]) == 0
        text = out.read_text()
        # The dump carries base64 ciphertext, never the plaintext.
        assert "Milena" not in text
        assert "milena@x.org" not in text
        assert "first_name_enc" in text
