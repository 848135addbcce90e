from emspec.cli import main

main()
