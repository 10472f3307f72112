from blockry import config

config.IN_TEST = True
