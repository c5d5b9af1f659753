# file: logic.py
def do_it():
    args = read_from_file()
    result = compute(args)
    return args, result

def compute(things):
    return sum(things)
