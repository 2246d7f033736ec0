# -*- coding: utf-8 -*-
"""
Copyright 2019 CSIRO Land and Water

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
"""
import csv
import logging
import os

from orjson import dumps as fast_dumps, loads as fast_loads, \
    OPT_INDENT_2, OPT_SORT_KEYS, OPT_SERIALIZE_NUMPY, OPT_NAIVE_UTC, OPT_UTC_Z

from util import utc_now_iso

logger = logging.getLogger(__name__)

orjson_option = OPT_INDENT_2 | OPT_SORT_KEYS | OPT_SERIALIZE_NUMPY | OPT_NAIVE_UTC | OPT_UTC_Z

# excluded when re-runs are compared
TIMESTAMP_KEY = 'timestamp'


def dumps(doc):
    return fast_dumps(doc, option=orjson_option)


def build_report(kind, body, run_config=None, oracle=None):
    """
    Wrap a result body the way every artifact is laid out:
    {'meta': {...}, <kind>: body}
    """
    meta = {
        'kind': kind,
        TIMESTAMP_KEY: utc_now_iso(),
    }
    if run_config is not None:
        meta['config'] = run_config
    if oracle is not None:
        meta['oracle'] = oracle.describe()
        meta['oracle_calls'] = oracle.calls
    return {'meta': meta, kind: body}


def strip_timestamp(doc):
    doc = dict(doc)
    meta = dict(doc.get('meta', {}))
    meta.pop(TIMESTAMP_KEY, None)
    doc['meta'] = meta
    return doc


def write_json(directory, name, doc):
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    with open(path, 'wb') as f:
        f.write(dumps(doc))
    logger.info("Wrote {}".format(path))
    return path


def read_json(path):
    with open(path, 'rb') as f:
        return fast_loads(f.read())


def write_csv(directory, name, header, rows):
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, name)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    logger.info("Wrote {}".format(path))
    return path
