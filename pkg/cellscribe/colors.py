import os

from colorama import Fore, Style, init

init(autoreset=True)


class foreground:
    """Terminal palette for CLI messages and the usage examples."""

    if os.name == "posix":
        RESET = "\033[0m"  # Reset to default text color

        BRED_FG = "\033[1;91m"  # Deep RED
        GREEN_FG = "\033[92m"  # Normal green
        YELLOW_FG = "\033[93m"  # Normal yellow
        BLUE_FG = "\033[94m"  # Normal BLUE
        CYAN_FG = "\033[96m"  # Normal cyan
        DWHITE_FG = "\033[1;97m"  # Deep white
        FWHITE_FG = "\033[2;97m"  # Faint white
        LWHITE_FG = "\033[4;97m"  # Underlined white

    else:
        RESET = Style.RESET_ALL

        BRED_FG = Fore.RED
        GREEN_FG = Fore.LIGHTGREEN_EX
        YELLOW_FG = Fore.LIGHTYELLOW_EX
        BLUE_FG = Fore.LIGHTBLUE_EX
        CYAN_FG = Fore.LIGHTCYAN_EX
        DWHITE_FG = Fore.WHITE
        FWHITE_FG = Fore.WHITE
        LWHITE_FG = Fore.WHITE
