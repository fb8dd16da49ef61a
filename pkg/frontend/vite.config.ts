import { defineConfig } from "vite";

// The dev server proxies API calls to a locally running `vidal serve`;
// the production build is served by the service itself from frontend/dist.
export default defineConfig({
  server: {
    proxy: {
      "/api": "http://127.0.0.1:8000",
    },
  },
  build: {
    outDir: "dist",
  },
});
