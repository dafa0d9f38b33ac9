"""
queuelab commands
~~~~~~~~~~~~~~~~~

Subcommands of the ``run.py`` entry point. Every module here exposes ``setup(app)``.

"""
