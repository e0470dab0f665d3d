import { ApiClient, ApiError } from "./api.js";
import { renderVisualizations } from "./charts.js";
import { renderActionDialog, type DialogContext } from "./dialog.js";
import { createStatusPoller, type StatusPoller } from "./polling.js";
import { createStore, type Store } from "./state.js";
import { TERMINAL_STATUSES, type ActionInfo, type AdapterInfo, type TaskInfo } from "./types.js";

function h(doc: Document, tag: string, attrs: Record<string, string> = {}, text = ""): HTMLElement {
  const node = doc.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

export interface App {
  store: Store;
  poller: StatusPoller;
}

/** Wire the single-page UI into a root element. */
export function mountApp(root: HTMLElement, api: ApiClient): App {
  const doc = root.ownerDocument;
  const store = createStore();
  let tasks: TaskInfo[] = [];
  let adaptersByTask: Record<string, AdapterInfo[]> = {};

  const poller = createStatusPoller({
    getAction: (id) => api.getAction(id),
    onUpdate: (action) =>
      store.update((s) => ({ ...s, actions: { ...s.actions, [action.id]: action } })),
    onStale: (actionId) =>
      store.update((s) => ({
        ...s,
        notices: [...s.notices.filter((n) => !n.includes(actionId)), `status for ${actionId} is stale; retrying`],
      })),
  });

  function notify(message: string): void {
    store.update((s) => ({ ...s, notices: [...s.notices, message] }));
  }

  async function refreshProjects(): Promise<void> {
    const projects = await api.listProjects();
    store.update((s) => ({ ...s, projects }));
  }

  async function openProject(projectId: string): Promise<void> {
    const actions = await api.listActions(projectId);
    store.update((s) => ({
      ...s,
      selectedProjectId: projectId,
      actions: Object.fromEntries(actions.map((a) => [a.id, a])),
    }));
    for (const action of actions) {
      if (!TERMINAL_STATUSES.has(action.status)) poller.track(action.id);
    }
  }

  function renderLogin(container: HTMLElement): void {
    const form = h(doc, "form", { "data-view": "login" });
    const tokenInput = h(doc, "input", { name: "token", type: "password", placeholder: "access token" }) as HTMLInputElement;
    const button = h(doc, "button", { type: "submit" }, "Sign in");
    form.append(tokenInput, button);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void (async () => {
        try {
          const userId = await api.login(tokenInput.value);
          store.update((s) => ({ ...s, token: tokenInput.value, userId }));
          tasks = await api.tasks();
          adaptersByTask = {};
          for (const task of tasks) adaptersByTask[task.task_id] = await api.adapters(task.task_id);
          await refreshProjects();
        } catch (error) {
          notify(error instanceof Error ? error.message : String(error));
        }
      })();
    });
    container.append(form);
  }

  function renderProjectList(container: HTMLElement): void {
    const state = store.getState();
    const list = h(doc, "ul", { "data-view": "projects" });
    for (const project of state.projects) {
      const item = h(doc, "li", { "data-project-id": project.id });
      const link = h(doc, "a", { href: "#" }, project.name);
      link.addEventListener("click", (event) => {
        event.preventDefault();
        void openProject(project.id);
      });
      item.append(link);
      list.append(item);
    }
    container.append(h(doc, "h2", {}, "Projects"), list);

    const form = h(doc, "form", { "data-view": "new-project" });
    const nameInput = h(doc, "input", { name: "project_name", placeholder: "project name" }) as HTMLInputElement;
    const locatorInput = h(doc, "input", { name: "sheet_locator", placeholder: "sheet locator (csv path or document id)" }) as HTMLInputElement;
    const submit = h(doc, "button", { type: "submit" }, "Create project");
    form.append(nameInput, locatorInput, submit);
    form.addEventListener("submit", (event) => {
      event.preventDefault();
      void (async () => {
        try {
          await api.createProject(nameInput.value, locatorInput.value);
          await refreshProjects();
        } catch (error) {
          notify(error instanceof ApiError ? error.detail.message : String(error));
        }
      })();
    });
    container.append(form);
  }

  function renderActionRow(action: ActionInfo): HTMLElement {
    const row = h(doc, "tr", { "data-action-id": action.id });
    row.append(h(doc, "td", {}, action.name));
    row.append(h(doc, "td", {}, action.kind));
    row.append(h(doc, "td", { class: "status", "data-status": action.status }, action.status));
    const detail = h(doc, "td", {});
    if (action.status === "Failed" && action.error) {
      detail.append(h(doc, "span", { class: "error" }, action.error.slice(-200)));
    }
    if (action.status === "Queued") {
      const run = h(doc, "button", { "data-run": action.id }, "Run");
      run.addEventListener("click", () => {
        void (async () => {
          try {
            await api.executeAction(action.id);
            poller.track(action.id);
          } catch (error) {
            notify(error instanceof ApiError ? error.detail.message : String(error));
          }
        })();
      });
      detail.append(run);
    }
    if (action.status === "Completed" && action.kind === "Training" && action.artifact_available) {
      detail.append(
        h(doc, "a", { href: api.artifactUrl(action.id), "data-artifact": action.id }, "Download adapter zip"),
      );
    }
    if (action.status === "Completed" && action.result?.type === "eval_report") {
      const report = action.result;
      const summary =
        report.accuracy !== undefined && report.macro_f1 !== undefined
          ? `accuracy ${report.accuracy.toFixed(4)}, macro-F1 ${report.macro_f1.toFixed(4)}`
          : `${report.n} predictions`;
      detail.append(h(doc, "span", { class: "report" }, summary));
      const charts = h(doc, "div", { class: "charts", "data-charts": action.id });
      renderVisualizations(charts, {
        predictions: Object.entries(report.label_distribution).flatMap(([label, count]) =>
          Array(count).fill(label) as string[],
        ),
      });
      detail.append(charts);
    }
    if (action.status === "Completed" && action.result?.type === "cluster_result") {
      const charts = h(doc, "div", { class: "charts", "data-charts": action.id });
      renderVisualizations(charts, { predictions: [], clusterAssignments: action.result.assignments });
      detail.append(charts);
    }
    row.append(detail);
    return row;
  }

  function renderProject(container: HTMLElement): void {
    const state = store.getState();
    const projectId = state.selectedProjectId as string;
    const project = state.projects.find((p) => p.id === projectId);
    container.append(h(doc, "h2", {}, project ? project.name : projectId));

    const expertToggle = h(doc, "label", { class: "expert-toggle" }, "Expert mode ");
    const checkbox = h(doc, "input", { type: "checkbox", name: "expert_mode" }) as HTMLInputElement;
    checkbox.checked = state.expertMode;
    checkbox.addEventListener("change", () =>
      store.update((s) => ({ ...s, expertMode: checkbox.checked })),
    );
    expertToggle.append(checkbox);
    container.append(expertToggle);

    const dialogHost = h(doc, "div", { "data-view": "action-dialog" });
    const ctx: DialogContext = {
      mode: state.expertMode ? "expert" : "normal",
      tasks,
      adaptersByTask,
    };
    const handle = renderActionDialog(dialogHost as HTMLElement, ctx, {
      onSubmit: (body) => {
        void (async () => {
          try {
            const action = await api.createAction(projectId, body);
            store.update((s) => ({ ...s, actions: { ...s.actions, [action.id]: action } }));
          } catch (error) {
            if (error instanceof ApiError) handle.showServerError(error.detail);
            else notify(String(error));
          }
        })();
      },
      onUpload: (file, taskId, datasetId) => {
        void (async () => {
          try {
            await api.uploadAdapter(projectId, file, taskId, datasetId);
            adaptersByTask[taskId] = await api.adapters(taskId, projectId);
            notify(`adapter ${datasetId} uploaded`);
          } catch (error) {
            if (error instanceof ApiError) handle.showServerError(error.detail);
          }
        })();
      },
    });
    container.append(dialogHost);

    const table = h(doc, "table", { "data-view": "actions" });
    const header = h(doc, "tr");
    for (const title of ["Name", "Type", "Status", ""]) header.append(h(doc, "th", {}, title));
    table.append(header);
    for (const action of Object.values(state.actions).filter((a) => a.project_id === projectId)) {
      table.append(renderActionRow(action));
    }
    container.append(table);
  }

  function render(): void {
    root.textContent = "";
    const state = store.getState();
    const notices = h(doc, "div", { class: "notices" });
    for (const message of state.notices.slice(-3)) notices.append(h(doc, "p", { class: "notice" }, message));
    root.append(notices);
    if (!state.token) renderLogin(root);
    else if (!state.selectedProjectId) renderProjectList(root);
    else renderProject(root);
  }

  store.subscribe(render);
  render();
  return { store, poller };
}
