# file: util.py
def initialize():
    print("initializing")

def process(result):
    print("processing", result)
