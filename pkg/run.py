import logging
import sys

from queuelab.cli import main

logging.getLogger('queuelab').setLevel(logging.INFO)

formatter = logging.Formatter('%(asctime)s:%(levelname)s:%(name)s: %(message)s')

handler = logging.FileHandler(filename='queuelab.log', encoding='utf-8', mode='a')
handler.setFormatter(formatter)

stream = logging.StreamHandler(stream=sys.stderr)
stream.setFormatter(formatter)

logging.getLogger().addHandler(handler)  # Log everything to queuelab.log.
logging.getLogger().addHandler(stream)   # Log everything to stderr, stdout carries results.

sys.exit(main(sys.argv[1:]))
