import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from config import BASE_DIR, Config, ConfigError, load_config


class LoadConfigTests(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, text):
        path = Path(self.tmp.name) / 'nooncal.cfg'
        path.write_text(text, encoding='utf-8')
        return path

    def test_defaults_without_file(self):
        with mock.patch.dict(os.environ, {}, clear=True):
            config = load_config()
        self.assertEqual(config.PROJECTIONS, 4)
        self.assertEqual(config.HIDDEN_SIZES, (30,))
        self.assertEqual(config.N_B, 50)
        self.assertEqual(config.TEST_PHASES_DEG, (20.8, 45.0, 90.0, 140.0, 168.8))

    def test_file_values_are_coerced(self):
        path = self.write(
            '# sensor\n'
            'VISIBILITY = 0.9, 0.95, 0.93, 0.9\n'
            'rate = 5000   # events per second\n'
            'HIDDEN_SIZES = 20,10\n'
            'SEED = 7\n'
            'DEBUG = yes\n'
        )
        with mock.patch.dict(os.environ, {}, clear=True):
            config = load_config(path)
        self.assertEqual(config.VISIBILITY, (0.9, 0.95, 0.93, 0.9))
        self.assertEqual(config.RATE, 5000.0)
        self.assertEqual(config.HIDDEN_SIZES, (20, 10))
        self.assertEqual(config.SEED, 7)
        self.assertIs(config.DEBUG, True)

    def test_unknown_key_names_the_line(self):
        path = self.write('SEED = 1\n\nNEURONS = 30\n')
        with self.assertRaises(ConfigError) as ctx:
            load_config(path)
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn('NEURONS', str(ctx.exception))

    def test_bad_value_names_the_line(self):
        path = self.write('N_B = many\n')
        with self.assertRaises(ConfigError) as ctx:
            load_config(path)
        self.assertEqual(ctx.exception.line, 1)

    def test_environment_then_file(self):
        path = self.write('SEED = 11\n')
        with mock.patch.dict(os.environ, {'NOONCAL_SEED': '5', 'NOONCAL_N_B': '25'}, clear=True):
            config = load_config(path)
        self.assertEqual(config.SEED, 11)
        self.assertEqual(config.N_B, 25)

    def test_override_skips_none(self):
        config = Config().override(SEED=3, N_B=None, SWEEP_HIDDEN='5,20x10')
        self.assertEqual(config.SEED, 3)
        self.assertEqual(config.N_B, 50)
        self.assertEqual(config.SWEEP_HIDDEN, ('5', '20x10'))
        with self.assertRaises(ConfigError):
            Config().override(UNKNOWN=1)

    def test_example_file_matches_defaults(self):
        with mock.patch.dict(os.environ, {}, clear=True):
            config = load_config(BASE_DIR / 'nooncal.example.cfg')
        self.assertEqual(config.as_items(), Config().as_items())

    def test_as_items_lists_every_setting(self):
        items = dict(Config().as_items())
        self.assertEqual(items['OFFSETS_DEG'], '0.0,90.0,180.0,270.0')
        self.assertEqual(items['SEED'], '0')
        self.assertNotIn('as_items', items)


if __name__ == "__main__":
    unittest.main()
