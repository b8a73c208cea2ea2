# app.py – entry point for the read-only run index API (`python app.py`)

from dotenv import load_dotenv

# .env has to be loaded before webapp/config.py reads the environment
load_dotenv()

import logging  # noqa: E402

from webapp import create_app  # noqa: E402
from webapp.config import ANELASTIC_API_DEBUG, ANELASTIC_API_PORT, ANELASTIC_LOG_LEVEL  # noqa: E402

app = create_app()


def main() -> None:
    logging.basicConfig(
        level=getattr(logging, ANELASTIC_LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    app.run(debug=ANELASTIC_API_DEBUG, port=ANELASTIC_API_PORT)


if __name__ == "__main__":
    main()
