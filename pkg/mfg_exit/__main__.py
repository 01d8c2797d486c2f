from mfg_exit.cli import main

main()
