from ecs_metrology.main import main

main()
