import io
import json
import os
import shutil
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

from scrapy.settings import Settings

from escl_lab.cli import main, parse_overrides
from escl_lab.encoder import init_params
from escl_lab.exceptions import UsageError
from escl_lab.numerics import RngStream
from escl_lab.storage import (
    Checkpoint, FilesystemCheckpointStorage, encode_checkpoint,
)


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.tmpdir = tempfile.mkdtemp()
        self.corpus = self.path('data', 'corpus.txt')
        self.sts = self.path('data', 'sts.tsv')

    def tearDown(self):
        shutil.rmtree(self.tmpdir)

    def path(self, *parts):
        return os.path.join(self.tmpdir, *parts)

    def call(self, *argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        with redirect_stdout(stdout), redirect_stderr(stderr):
            code = main(list(argv))
        records = [json.loads(line)
                   for line in stdout.getvalue().splitlines()]
        return code, records, stderr.getvalue()

    def gen_data(self, *extra):
        return self.call('gen-data', '--out-dir', self.path('data'),
                         '--n-train', '64', '--n-pairs', '32',
                         '--vocab-size', '40', *extra)

    def train(self, checkpoint, *extra):
        return self.call('train', '--corpus', self.corpus, '--sts', self.sts,
                         '--batch_size', '8', '--embed_dim', '8',
                         '--output_dim', '8', '--eval_every', '2',
                         '--steps', '4', '--checkpoint_path', checkpoint,
                         *extra)

    def load(self, path):
        return FilesystemCheckpointStorage(Settings()).retrieve_checkpoint(path)


class ParseOverridesTest(unittest.TestCase):

    def test_forms(self):
        self.assertEqual(parse_overrides(['--loss.lambda', '0', '--r-high=0.5',
                                          '--batch_size', '4']),
                         {'loss.lambda': '0', 'r_high': '0.5',
                          'batch_size': '4'})

    def test_errors(self):
        self.assertRaises(UsageError, parse_overrides, ['--steps'])
        self.assertRaises(UsageError, parse_overrides, ['steps', '3'])
        with self.assertRaises(UsageError) as cm:
            parse_overrides(['--bogus', '1'])
        self.assertIn('bogus', str(cm.exception))


class GenDataTest(CliTestCase):

    def test_writes_files(self):
        code, records, stderr = self.gen_data()
        self.assertEqual(code, 0)
        self.assertEqual(records[0]['event'], 'config')
        self.assertEqual(records[-1]['n_train'], 64)
        self.assertEqual(records[-1]['n_pairs'], 32)
        for path in (self.corpus, self.sts):
            self.assertTrue(os.path.exists(path))
            self.assertTrue(os.path.exists(path + '.config.json'))
        with open(self.sts) as f:
            self.assertEqual(len(f.read().splitlines()), 32)

    def test_refuses_to_overwrite(self):
        self.gen_data()
        with open(self.corpus, 'rb') as f:
            before = f.read()
        code, _, stderr = self.gen_data()
        self.assertEqual(code, 1)
        self.assertIn('--force', stderr)
        code, _, _ = self.gen_data('--force')
        self.assertEqual(code, 0)
        with open(self.corpus, 'rb') as f:
            self.assertEqual(f.read(), before)

    def test_same_seed_same_files(self):
        self.gen_data()
        code, _, _ = self.call('gen-data', '--out-dir', self.path('again'),
                               '--n-train', '64', '--n-pairs', '32',
                               '--vocab-size', '40')
        self.assertEqual(code, 0)
        for name in ('corpus.txt', 'sts.tsv'):
            with open(self.path('data', name), 'rb') as f:
                first = f.read()
            with open(self.path('again', name), 'rb') as f:
                self.assertEqual(f.read(), first)

    def test_out_dir_is_a_file(self):
        blocker = self.path('blocker')
        with open(blocker, 'w') as f:
            f.write('x')
        code, records, stderr = self.call('gen-data', '--out-dir', blocker,
                                          '--vocab-size', '40')
        self.assertEqual(code, 2)
        self.assertIn(blocker, stderr)
        self.assertNotIn('Traceback', stderr)
        self.assertNotEqual(records[-1]['event'], 'result')

    def test_bad_arguments(self):
        code, records, stderr = self.call('gen-data', '--out-dir',
                                          self.path('data'), '--n-pairs', '0')
        self.assertEqual(code, 1)
        self.assertEqual(records, [])
        self.assertIn('--n-pairs', stderr)
        code, _, _ = self.call('gen-data')
        self.assertEqual(code, 1)
        code, _, _ = self.call('gen-data', '--out-dir', self.path('data'),
                               '--steps', '3')
        self.assertEqual(code, 1)


class TrainEvalTest(CliTestCase):

    def setUp(self):
        super(TrainEvalTest, self).setUp()
        self.gen_data()
        self.checkpoint = self.path('runs', 'model.npz')

    def test_train(self):
        code, records, stderr = self.train(self.checkpoint)
        self.assertEqual(code, 0, stderr)
        config = records[0]
        self.assertEqual(config['event'], 'config')
        self.assertEqual(config['config']['r_low'], 0.1)
        self.assertEqual(config['config']['r_high'], 0.45)
        self.assertEqual(config['config']['loss.lambda'], 0.0025)
        self.assertEqual(config['config']['batch_size'], 8)
        self.assertIn('escl-lab', stderr)

        result = records[-1]
        self.assertEqual(result['event'], 'result')
        self.assertEqual(result['step'], 4)
        self.assertTrue(-1.0 <= result['rho'] <= 1.0)
        self.assertEqual(result['corpus']['lines_read'], 64)
        for suffix in ('', '.config.json', '.trace.jsonl',
                       '.trace.jsonl.config.json'):
            self.assertTrue(os.path.exists(self.checkpoint + suffix))
        with open(self.checkpoint + '.trace.jsonl') as f:
            self.assertEqual(len(f.read().splitlines()), 4)
        with open(self.checkpoint + '.config.json') as f:
            self.assertEqual(json.load(f)['steps'], 4)

    def test_rerun_is_reproducible(self):
        _, first, _ = self.train(self.checkpoint)
        other = self.path('runs', 'other.npz')
        _, second, _ = self.train(other)
        self.assertEqual(first[-1]['rho'], second[-1]['rho'])
        self.assertEqual(self.load(self.checkpoint).params,
                         self.load(other).params)

    def test_lambda_zero_is_info_nce_only(self):
        _, rd, _ = self.train(self.checkpoint, '--loss.lambda', '0')
        _, none, _ = self.train(self.path('runs', 'none.npz'),
                                '--loss.lambda', '0', '--loss.variant', 'none')
        self.assertEqual(rd[-1]['rho'], none[-1]['rho'])
        self.assertEqual(rd[-1]['loss']['info_nce'],
                         none[-1]['loss']['info_nce'])

    def test_config_file_priority(self):
        config_path = self.path('config.json')
        with open(config_path, 'w') as f:
            json.dump({'steps': 3, 'seed': 5, 'loss.lambda': 0.1}, f)
        code, records, stderr = self.train(self.checkpoint, '--config',
                                           config_path, '--steps', '2')
        self.assertEqual(code, 0, stderr)
        self.assertEqual(records[0]['config']['steps'], 2)
        self.assertEqual(records[0]['config']['seed'], 5)
        self.assertEqual(records[0]['config']['loss.lambda'], 0.1)
        self.assertEqual(records[-1]['step'], 2)

    def test_resume(self):
        direct = self.path('runs', 'direct.npz')
        self.train(direct)
        self.train(self.checkpoint, '--steps', '2')
        code, records, stderr = self.train(self.checkpoint, '--resume')
        self.assertEqual(code, 0, stderr)
        self.assertEqual(records[-1]['step'], 4)
        self.assertEqual(self.load(self.checkpoint).params,
                         self.load(direct).params)

    def test_unwritable_trace(self):
        blocker = self.path('blocker')
        with open(blocker, 'w') as f:
            f.write('x')
        trace = os.path.join(blocker, 't.jsonl')
        code, _, stderr = self.train(self.checkpoint, '--trace_path', trace)
        self.assertEqual(code, 2)
        self.assertIn(blocker, stderr)
        self.assertNotIn('Traceback', stderr)

    def test_resume_appends_to_the_trace(self):
        direct = self.path('runs', 'direct.npz')
        self.train(direct)
        self.train(self.checkpoint, '--steps', '2')
        self.train(self.checkpoint, '--resume')
        with open(direct + '.trace.jsonl') as f:
            expected = f.read()
        with open(self.checkpoint + '.trace.jsonl') as f:
            self.assertEqual(f.read(), expected)

    def test_resume_without_checkpoint(self):
        code, _, stderr = self.train(self.checkpoint, '--resume')
        self.assertEqual(code, 2)
        self.assertIn(self.checkpoint, stderr)

    def test_config_errors(self):
        code, records, stderr = self.train(self.checkpoint, '--bogus', '1')
        self.assertEqual(code, 1)
        self.assertEqual(records, [])
        self.assertIn('bogus', stderr)
        code, _, stderr = self.train(self.checkpoint, '--loss.variant',
                                     'triplet')
        self.assertEqual(code, 1)
        self.assertIn('triplet', stderr)
        code, _, _ = self.train(self.checkpoint, '--r_high', '0.05')
        self.assertEqual(code, 1)
        code, _, _ = self.train(self.checkpoint, '--steps', 'many')
        self.assertEqual(code, 1)
        self.assertFalse(os.path.exists(self.checkpoint))

    def test_missing_corpus(self):
        code, _, stderr = self.call('train', '--corpus', self.path('none.txt'),
                                    '--checkpoint_path', self.checkpoint)
        self.assertEqual(code, 2)
        self.assertIn('none.txt', stderr)

    def test_eval(self):
        _, trained, _ = self.train(self.checkpoint)
        code, records, stderr = self.call('eval', '--checkpoint',
                                          self.checkpoint, '--sts', self.sts)
        self.assertEqual(code, 0, stderr)
        result = records[-1]
        self.assertEqual(result['event'], 'result')
        self.assertEqual(result['rho'], trained[-1]['rho'])
        self.assertEqual(result['dataset'], 'sts.tsv')
        self.assertEqual(result['n_pairs'], 32)
        self.assertEqual(result['step'], 4)

    def test_eval_probe(self):
        self.train(self.checkpoint)
        code, records, stderr = self.call('eval', '--checkpoint',
                                          self.checkpoint, '--sts', self.sts,
                                          '--probe-rates', '0,0.1,0.45')
        self.assertEqual(code, 0, stderr)
        probes = [r for r in records if r['event'] == 'probe']
        self.assertEqual([p['rate'] for p in probes], [0.0, 0.1, 0.45])
        self.assertEqual(probes[0]['drift'], 0.0)
        self.assertGreater(probes[2]['drift'], probes[1]['drift'])

    def test_eval_data_errors(self):
        code, _, stderr = self.call('eval', '--checkpoint',
                                    self.path('missing.npz'), '--sts',
                                    self.sts)
        self.assertEqual(code, 2)
        self.assertIn('missing.npz', stderr)

        self.train(self.checkpoint)
        bad_sts = self.path('bad.tsv')
        with open(bad_sts, 'w') as f:
            f.write('a b\tc\t1.0\na b c 2.0\n')
        code, _, stderr = self.call('eval', '--checkpoint', self.checkpoint,
                                    '--sts', bad_sts)
        self.assertEqual(code, 2)
        self.assertIn('line 2', stderr)

    def test_eval_vocabulary_mismatch(self):
        params = init_params(5, 4, 4, RngStream(0))
        checkpoint = Checkpoint(params=params,
                                vocabulary=['<pad>', '<unk>', 'a', 'b', 'c'])
        object.__setattr__(checkpoint, 'vocabulary',
                           ('<pad>', '<unk>', 'a', 'b', 'c', 'd'))
        path = self.path('mismatch.npz')
        with open(path, 'wb') as f:
            f.write(encode_checkpoint(checkpoint))
        code, _, stderr = self.call('eval', '--checkpoint', path, '--sts',
                                    self.sts)
        self.assertEqual(code, 2)
        self.assertIn('mismatch.npz', stderr)

    def test_eval_rejects_overrides(self):
        code, _, _ = self.call('eval', '--checkpoint', self.checkpoint,
                               '--sts', self.sts, '--steps', '3')
        self.assertEqual(code, 1)


class GradcheckTest(CliTestCase):

    def test_gradcheck(self):
        code, records, stderr = self.call('gradcheck', '--trials', '1')
        self.assertEqual(code, 0, stderr)
        checks = [r for r in records if r['event'] == 'check']
        self.assertEqual([c['check'] for c in checks],
                         ['quadratic', 'info_nce', 'rd_loss', 'cossim_loss',
                          'escl_loss', 'encoder'])
        self.assertTrue(all(c['passed'] for c in checks))
        self.assertTrue(records[-1]['passed'])
        self.assertLess(records[-1]['max_rel_error'], 1e-4)


class AblateTest(CliTestCase):

    def test_ablate(self):
        self.gen_data()
        out = self.path('reports', 'sweep')
        code, records, stderr = self.call(
            'ablate', '--corpus', self.corpus, '--sts', self.sts,
            '--rates', '0.35,0.45', '--variants', 'rd,none', '--seeds', '0,1',
            '--out', out, '--steps', '2', '--batch_size', '8',
            '--embed_dim', '8', '--output_dim', '8')
        self.assertEqual(code, 0, stderr)
        rows = [r for r in records if r['event'] == 'row']
        self.assertEqual([(r['r_high'], r['variant']) for r in rows],
                         [(0.35, 'rd'), (0.35, 'none'), (0.45, 'rd'),
                          (0.45, 'none')])
        self.assertEqual(records[-1]['runs'], 8)
        with open(out + '.json') as f:
            report = json.load(f)
        self.assertEqual(len(report['runs']), 8)
        with open(out + '.txt') as f:
            self.assertEqual(len(f.read().splitlines()), 5)
        self.assertTrue(os.path.exists(out + '.json.config.json'))
        ckpt = self.load(out + '-r0.45-none-s1.npz')
        self.assertEqual(ckpt.step, 2)
        self.assertEqual(ckpt.config['seed'], 1)

    def test_unknown_variant(self):
        self.gen_data()
        code, _, stderr = self.call(
            'ablate', '--corpus', self.corpus, '--sts', self.sts,
            '--variants', 'rd,triplet', '--out', self.path('sweep'))
        self.assertEqual(code, 1)
        self.assertIn('triplet', stderr)

    def test_unwritable_report(self):
        self.gen_data()
        blocker = self.path('blocker')
        with open(blocker, 'w') as f:
            f.write('x')
        code, _, stderr = self.call(
            'ablate', '--corpus', self.corpus, '--sts', self.sts,
            '--rates', '0.45', '--variants', 'rd', '--seeds', '0',
            '--out', os.path.join(blocker, 'sweep'), '--steps', '2',
            '--batch_size', '8', '--embed_dim', '8', '--output_dim', '8')
        self.assertEqual(code, 2)
        self.assertIn(blocker, stderr)
        self.assertNotIn('Traceback', stderr)
