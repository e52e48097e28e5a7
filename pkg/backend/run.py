import uvicorn

import config

if __name__ == "__main__":
    # PORT comes from the environment (.env honoured), default 8000
    uvicorn.run("main:app", host="0.0.0.0", port=config.PORT, reload=True)
