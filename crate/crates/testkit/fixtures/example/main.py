# file: main.py
def main():
    initialize()
    result, _ = do_it()
    process(result)

main()
